#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scopf/error.hpp"
#include "scopf/oracle.hpp"
#include "scopf/pipeline.hpp"

namespace scopf::cli {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::filesystem::path sibling(const std::filesystem::path& p, const std::string& suffix) {
    return p.parent_path() / (p.filename().string() + suffix);
}

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& prefix) {
    if (!j.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
        if (!ok) throw ConfigError("unknown config key '" + prefix + key + "'");
    }
}

GridModel load_model(const RunConfig& config) {
    if (config.case_path.empty()) throw ConfigError("no case file given (--case or \"case\" in the config)");
    return GridModel(load_case(config.case_path));
}

}  // namespace

void RunConfig::validate() const {
    method_from_string(method);
    trainer.validate();
    sampler.validate();
    if (train_size < 1 || test_size < 1) throw ConfigError("train_size and test_size must be at least 1");
    if (!(resolution > 0)) throw ConfigError("resolution must be positive");
}

RunConfig config_from_json(const std::string& text) {
    RunConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        reject_unknown(j, {"case", "method", "train_size", "test_size", "resolution", "seed", "trainer", "sampler"},
                       "");
        take(j, "case", c.case_path);
        take(j, "method", c.method);
        take(j, "train_size", c.train_size);
        take(j, "test_size", c.test_size);
        take(j, "resolution", c.resolution);
        take(j, "seed", c.seed);
        if (j.contains("trainer")) {
            const auto& t = j.at("trainer");
            reject_unknown(t, {"K", "L", "batch", "rho0", "rho_max", "tau", "alpha", "dual_loss_rho", "obj_scale", "lr",
                               "ld_rho", "bisection_iterations"},
                           "trainer.");
            auto& tc = c.trainer;
            take(t, "K", tc.outer_iterations);
            take(t, "L", tc.inner_iterations);
            take(t, "batch", tc.batch);
            take(t, "rho0", tc.rho0);
            take(t, "rho_max", tc.rho_max);
            take(t, "tau", tc.tau);
            take(t, "alpha", tc.alpha);
            take(t, "dual_loss_rho", tc.dual_loss_rho);
            take(t, "obj_scale", tc.obj_scale);
            take(t, "lr", tc.lr);
            take(t, "ld_rho", tc.ld_rho);
            take(t, "bisection_iterations", tc.bisection_iterations);
        }
        if (j.contains("sampler")) {
            const auto& s = j.at("sampler");
            reject_unknown(s, {"mu", "load_corr", "factor_corr", "z95"}, "sampler.");
            take(s, "mu", c.sampler.mu);
            take(s, "load_corr", c.sampler.load_corr);
            take(s, "factor_corr", c.sampler.factor_corr);
            take(s, "z95", c.sampler.z95);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.trainer.seed = c.seed;
    c.sampler.seed = c.seed;
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

std::string config_to_json(const RunConfig& c) {
    const auto& t = c.trainer;
    json j = {{"case", c.case_path},
              {"method", c.method},
              {"train_size", c.train_size},
              {"test_size", c.test_size},
              {"resolution", c.resolution},
              {"seed", c.seed},
              {"trainer",
               {{"K", t.outer_iterations},
                {"L", t.inner_iterations},
                {"batch", t.batch},
                {"rho0", t.rho0},
                {"rho_max", t.rho_max},
                {"tau", t.tau},
                {"alpha", t.alpha},
                {"dual_loss_rho", t.dual_loss_rho},
                {"obj_scale", t.obj_scale},
                {"lr", t.lr},
                {"ld_rho", t.ld_rho},
                {"bisection_iterations", t.bisection_iterations}}},
              {"sampler",
               {{"mu", c.sampler.mu},
                {"load_corr", c.sampler.load_corr},
                {"factor_corr", c.sampler.factor_corr},
                {"z95", c.sampler.z95}}}};
    return j.dump(2) + "\n";
}

void apply(RunConfig& c, const Overrides& o) {
    if (o.case_path) c.case_path = *o.case_path;
    if (o.method) c.method = *o.method;
    auto& t = c.trainer;
    if (o.K) t.outer_iterations = *o.K;
    if (o.L) t.inner_iterations = *o.L;
    if (o.batch) t.batch = *o.batch;
    if (o.bisection_iterations) t.bisection_iterations = *o.bisection_iterations;
    if (o.lr) t.lr = *o.lr;
    if (o.rho0) t.rho0 = *o.rho0;
    if (o.rho_max) t.rho_max = *o.rho_max;
    if (o.tau) t.tau = *o.tau;
    if (o.alpha) t.alpha = *o.alpha;
    if (o.dual_loss_rho) t.dual_loss_rho = *o.dual_loss_rho;
    if (o.obj_scale) t.obj_scale = *o.obj_scale;
    if (o.ld_rho) t.ld_rho = *o.ld_rho;
    if (o.mu) c.sampler.mu = *o.mu;
    if (o.load_corr) c.sampler.load_corr = *o.load_corr;
    if (o.factor_corr) c.sampler.factor_corr = *o.factor_corr;
    if (o.resolution) c.resolution = *o.resolution;
    if (o.train_size) c.train_size = *o.train_size;
    if (o.test_size) c.test_size = *o.test_size;
    if (o.seed) c.seed = *o.seed;
    c.trainer.seed = c.seed;
    c.sampler.seed = c.seed;
}

EvalReport evaluate(const GridModel& model, const Mlp& primal, const Dataset& data, int iterations) {
    using Clock = std::chrono::steady_clock;
    EvalReport report;
    auto& s = report.summary;
    double gap_sum = 0.0;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        const PreparedInstance prep = prepare_instance(model, rec.inst);
        const auto t0 = Clock::now();
        const PipelineOutput out = infer(model, primal, prep, rec.inst.x, iterations);
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

        EvalRow row;
        row.index = i;
        row.seed = rec.inst.seed;
        row.objective = out.objective;
        row.max_abs_h = out.h.size() ? out.h.lpNorm<Eigen::Infinity>() : 0.0;
        row.max_eta_base = out.est.eta0.size() ? out.est.eta0.maxCoeff() : 0.0;
        row.max_eta_gen = out.est.eta_g.size() ? out.est.eta_g.maxCoeff() : 0.0;
        row.max_eta_line = out.est.eta_e.size() ? out.est.eta_e.maxCoeff() : 0.0;
        row.infer_ms = ms;
        if (rec.label && rec.label->feasible) {
            row.oracle_objective = rec.label->obj_star;
            row.gap_pct = 100.0 * (out.objective - rec.label->obj_star) / rec.label->obj_star;
            gap_sum += *row.gap_pct;
            s.max_gap_pct = std::max(s.max_gap_pct.value_or(-std::numeric_limits<double>::infinity()), *row.gap_pct);
            ++s.labeled;
        }
        s.mean_objective += row.objective;
        s.max_abs_h = std::max(s.max_abs_h, row.max_abs_h);
        s.max_eta_base = std::max(s.max_eta_base, row.max_eta_base);
        s.max_eta_gen = std::max(s.max_eta_gen, row.max_eta_gen);
        s.max_eta_line = std::max(s.max_eta_line, row.max_eta_line);
        s.mean_infer_ms += ms;
        s.max_infer_ms = std::max(s.max_infer_ms, ms);
        report.rows.push_back(row);
    }
    s.instances = report.rows.size();
    if (s.instances > 0) {
        s.mean_objective /= static_cast<double>(s.instances);
        s.mean_infer_ms /= static_cast<double>(s.instances);
    }
    if (s.labeled > 0) s.mean_gap_pct = gap_sum / static_cast<double>(s.labeled);
    return report;
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << std::setprecision(12);
    out << "index,seed,objective,oracle_objective,gap_pct,max_abs_h,max_eta_base,max_eta_gen,max_eta_line,infer_ms\n";
    for (const auto& r : report.rows) {
        out << r.index << ',' << r.seed << ',' << r.objective << ',';
        if (r.oracle_objective) out << *r.oracle_objective;
        out << ',';
        if (r.gap_pct) out << *r.gap_pct;
        out << ',' << r.max_abs_h << ',' << r.max_eta_base << ',' << r.max_eta_gen << ',' << r.max_eta_line << ','
            << r.infer_ms << '\n';
    }
    return out.str();
}

std::string summary_to_json(const EvalSummary& s) {
    json j = {{"instances", s.instances},
              {"labeled", s.labeled},
              {"mean_objective", s.mean_objective},
              {"mean_gap_pct", s.mean_gap_pct ? json(*s.mean_gap_pct) : json(nullptr)},
              {"max_gap_pct", s.max_gap_pct ? json(*s.max_gap_pct) : json(nullptr)},
              {"max_abs_h_pu", s.max_abs_h},
              {"max_eta_base_pu", s.max_eta_base},
              {"max_eta_gen_pu", s.max_eta_gen},
              {"max_eta_line_pu", s.max_eta_line},
              {"mean_infer_ms", s.mean_infer_ms},
              {"max_infer_ms", s.max_infer_ms}};
    return j.dump(2) + "\n";
}

void print_summary(std::ostream& os, const EvalSummary& s, double base_mva, bool mva) {
    const double scale = mva ? base_mva : 1.0;
    const char* unit = mva ? "MW" : "p.u.";
    os << "instances            " << s.instances << " (" << s.labeled << " with oracle labels)\n";
    os << "mean objective       " << s.mean_objective << '\n';
    if (s.mean_gap_pct) os << "mean gap             " << std::fixed << std::setprecision(3) << *s.mean_gap_pct << " %\n";
    if (s.max_gap_pct) os << "max gap              " << std::fixed << std::setprecision(3) << *s.max_gap_pct << " %\n";
    os << std::defaultfloat << std::setprecision(6);
    os << "max |h|              " << s.max_abs_h * scale << ' ' << unit << '\n';
    os << "max eta (base)       " << s.max_eta_base * scale << ' ' << unit << '\n';
    os << "max eta (gen cont.)  " << s.max_eta_gen * scale << ' ' << unit << '\n';
    os << "max eta (line cont.) " << s.max_eta_line * scale << ' ' << unit << '\n';
    os << "inference            " << s.mean_infer_ms << " ms mean, " << s.max_infer_ms << " ms max\n";
}

void cmd_gen(const GenArgs& args, std::ostream& log) {
    args.config.validate();
    if (args.out.empty()) throw ConfigError("gen needs --out");
    const GridCase grid = load_case(args.config.case_path);
    grid.validate();
    const std::size_t n = args.n.value_or(args.config.train_size);
    if (n < 1) throw ConfigError("--n must be at least 1");

    const Dataset data = generate_dataset(grid, args.config.sampler, n);
    const std::string text = dataset_to_text(data);
    write_file(args.out, text);

    const std::string config_text = config_to_json(args.config);
    write_file(sibling(args.out, ".config.json"), config_text);
    const json manifest = {{"dataset", args.out.filename().string()},
                           {"records", n},
                           {"seed", args.config.seed},
                           {"resamples", data.resamples},
                           {"config_hash", hex64(fnv1a(config_text))},
                           {"case_hash", hex64(fnv1a(read_file(args.config.case_path)))},
                           {"dataset_hash", hex64(fnv1a(text))}};
    write_file(sibling(args.out, ".manifest.json"), manifest.dump(2) + "\n");
    log << "wrote " << n << " instances to " << args.out.string() << " (" << data.resamples
        << " capacity resamples)\n";
}

void cmd_oracle(const OracleArgs& args, std::ostream& log) {
    args.config.validate();
    const GridModel model = load_model(args.config);
    if (model.n_gen() > kMaxOracleGenerators)
        throw ConfigError("the oracle is limited to micro cases with at most " + std::to_string(kMaxOracleGenerators) +
                          " generators; this case has " + std::to_string(model.n_gen()));
    Dataset data = load_dataset(model.grid, args.data);
    std::size_t infeasible = 0;
    for (auto& rec : data.records) {
        const OracleResult res = oracle_solve(model, rec.inst, args.config.resolution);
        rec.label = to_label(res);
        if (!res.feasible) ++infeasible;
    }
    const auto out = args.out.empty() ? args.data : args.out;
    write_file(out, dataset_to_text(data));
    write_file(sibling(out, ".config.json"), config_to_json(args.config));
    log << "labeled " << data.size() << " instances at resolution " << args.config.resolution << " ("
        << infeasible << " contingency-infeasible) -> " << out.string() << '\n';
}

TrainResult cmd_train(const TrainArgs& args, std::ostream& log) {
    args.config.validate();
    if (args.out_dir.empty()) throw ConfigError("train needs --out");
    const Method method = method_from_string(args.config.method);
    const GridModel model = load_model(args.config);
    const Dataset data = load_dataset(model.grid, args.data);
    const PreparedSet set = prepare_set(model, data, is_supervised(method));

    std::filesystem::create_directories(args.out_dir);
    write_file(args.out_dir / "config.json", config_to_json(args.config));

    const ProgressFn progress = [&](const TrainResult& r) {
        save_checkpoint({r, model.n_gen(), model.n_load(), model.n_gen_contingencies()},
                        args.out_dir / "checkpoint.json");
        const auto& h = r.history.back();
        log << "outer " << h.outer_k << ": rho " << h.rho << " -> " << h.rho_next << ", max|h| " << h.v_k
            << ", mean objective " << h.mean_objective << '\n';
    };
    TrainResult run = train(method, model, set, args.config.trainer, progress);

    Checkpoint ck{run, model.n_gen(), model.n_load(), model.n_gen_contingencies()};
    save_checkpoint(ck, args.out_dir / "checkpoint.json");
    write_file(args.out_dir / "log.csv", log_to_csv(run.log));

    const auto& last = run.history.back();
    const json summary = {{"method", to_string(method)},
                          {"instances", set.prepared.size()},
                          {"steps", run.log.size()},
                          {"final_rho", run.state.rho},
                          {"max_abs_h_pu", last.v_k},
                          {"mean_objective", last.mean_objective},
                          {"final_loss", run.log.back().loss}};
    write_file(args.out_dir / "summary.json", summary.dump(2) + "\n");
    log << "trained " << to_string(method) << " for " << run.log.size() << " steps; train max|h| " << last.v_k
        << " p.u.\n";
    return run;
}

EvalReport cmd_eval(const EvalArgs& args, std::ostream& log) {
    args.config.validate();
    const GridModel model = load_model(args.config);
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    check_compatible(ck, model);
    const Dataset data = load_dataset(model.grid, args.data);
    EvalReport report = evaluate(model, ck.run.primal, data, ck.run.config.bisection_iterations);
    if (!args.out.empty()) {
        write_file(args.out, report_to_csv(report));
        write_file(sibling(args.out, ".summary.json"), summary_to_json(report.summary));
        write_file(sibling(args.out, ".config.json"), config_to_json(args.config));
    }
    print_summary(log, report.summary, model.grid.base_mva, args.mva);
    return report;
}

void cmd_inspect(const InspectArgs& args, std::ostream& out) {
    const GridModel model = load_model(args.config);
    const auto& g = model.grid;
    const double scale = args.mva ? g.base_mva : 1.0;
    const char* unit = args.mva ? "MW" : "p.u.";
    out << "buses " << g.n_bus << ", generators " << g.n_gen() << ", lines " << g.n_line() << ", loads "
        << g.n_load() << ", base " << g.base_mva << " MVA, Pi " << g.penalty_pi << '\n';
    out << "total base demand " << g.d0.sum() * scale << ' ' << unit << ", capacity " << g.glb.sum() * scale
        << " .. " << g.gub0.sum() * scale << ' ' << unit << '\n';
    out << "generator contingencies " << model.n_gen_contingencies() << ", line contingencies "
        << model.n_line_contingencies() << " (" << g.n_line() - model.n_line_contingencies() << " islanding)\n";
    out << "dim(x) " << 2 * g.n_gen() + g.n_load() << '\n';
    if (args.data) {
        const Dataset data = load_dataset(g, *args.data);
        std::size_t labeled = 0, feasible = 0;
        double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
        for (const auto& r : data.records) {
            if (r.label) ++labeled;
            if (r.label && r.label->feasible) ++feasible;
            dmin = std::min(dmin, r.inst.d.sum());
            dmax = std::max(dmax, r.inst.d.sum());
        }
        out << "dataset: " << data.size() << " records, " << labeled << " labeled (" << feasible
            << " feasible), " << data.resamples << " resamples, total demand " << dmin * scale << " .. "
            << dmax * scale << ' ' << unit << '\n';
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const DivergenceError*>(&e)) return 4;
    return 1;
}

}  // namespace scopf::cli
