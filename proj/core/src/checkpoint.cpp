#include "scopf/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scopf/error.hpp"

namespace scopf {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "scopf-checkpoint";
constexpr int kVersion = 1;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// JSON has no infinity; v_prev starts at +inf.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nullable(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

json mlp_json(const Mlp& net) {
    return {{"sizes", net.sizes()}, {"layernorm", net.layernorm()}, {"params", vec_json(net.params())}};
}

Mlp mlp_from(const json& j) {
    Mlp net(j.at("sizes").get<std::vector<int>>(), j.at("layernorm").get<bool>());
    VectorXd p = vec_from(j.at("params"));
    if (p.size() != net.params().size()) throw DataError("checkpoint network parameter count does not match its sizes");
    net.params() = std::move(p);
    return net;
}

json adam_json(const AdamState& s) {
    return {{"m", vec_json(s.m)},         {"v", vec_json(s.v)},         {"step", s.step},
            {"beta1", s.beta1},           {"beta2", s.beta2},           {"eps", s.eps}};
}

AdamState adam_from(const json& j) {
    AdamState s;
    s.m = vec_from(j.at("m"));
    s.v = vec_from(j.at("v"));
    s.step = j.at("step").get<std::int64_t>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.eps = j.at("eps").get<double>();
    return s;
}

json config_json(const TrainerConfig& c) {
    return {{"K", c.outer_iterations},
            {"L", c.inner_iterations},
            {"batch", c.batch},
            {"rho0", c.rho0},
            {"rho_max", c.rho_max},
            {"tau", c.tau},
            {"alpha", c.alpha},
            {"dual_loss_rho", c.dual_loss_rho},
            {"obj_scale", c.obj_scale},
            {"lr", c.lr},
            {"ld_rho", c.ld_rho},
            {"bisection_iterations", c.bisection_iterations},
            {"seed", c.seed}};
}

TrainerConfig config_from(const json& j) {
    TrainerConfig c;
    c.outer_iterations = j.at("K").get<int>();
    c.inner_iterations = j.at("L").get<int>();
    c.batch = j.at("batch").get<int>();
    c.rho0 = j.at("rho0").get<double>();
    c.rho_max = j.at("rho_max").get<double>();
    c.tau = j.at("tau").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.dual_loss_rho = j.at("dual_loss_rho").get<double>();
    c.obj_scale = j.at("obj_scale").get<double>();
    c.lr = j.at("lr").get<double>();
    c.ld_rho = j.at("ld_rho").get<double>();
    c.bisection_iterations = j.at("bisection_iterations").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string trainer_config_to_json(const TrainerConfig& config) { return config_json(config).dump(2); }

std::string checkpoint_to_text(const Checkpoint& ck) {
    const auto& r = ck.run;
    json doc = {{"format", kFormat},
                {"version", kVersion},
                {"method", to_string(r.method)},
                {"n_gen", ck.n_gen},
                {"n_load", ck.n_load},
                {"n_gen_contingencies", ck.n_gen_contingencies},
                {"config", config_json(r.config)},
                {"primal", mlp_json(r.primal)},
                {"primal_adam", adam_json(r.primal_adam)},
                {"dual", r.dual ? mlp_json(*r.dual) : json(nullptr)},
                {"frozen_dual", r.frozen_dual ? mlp_json(*r.frozen_dual) : json(nullptr)},
                {"dual_adam", r.dual ? adam_json(r.dual_adam) : json(nullptr)},
                {"trainer",
                 {{"rho", r.state.rho},
                  {"v_prev", finite_or_null(r.state.v_prev)},
                  {"outer", r.state.outer},
                  {"step", r.state.step}}}};
    json history = json::array();
    for (const auto& h : r.history)
        history.push_back({{"outer_k", h.outer_k},
                           {"rho", h.rho},
                           {"rho_next", h.rho_next},
                           {"v_k", h.v_k},
                           {"v_prev", finite_or_null(h.v_prev)},
                           {"mean_objective", h.mean_objective}});
    doc["history"] = std::move(history);
    return doc.dump(1);
}

Checkpoint checkpoint_from_text(const std::string& text) {
    Checkpoint ck;
    try {
        const json doc = json::parse(text);
        if (doc.value("format", "") != kFormat) throw DataError("not a scopf checkpoint (bad format tag)");
        if (doc.value("version", 0) != kVersion) throw DataError("unsupported checkpoint version");
        auto& r = ck.run;
        r.method = method_from_string(doc.at("method").get<std::string>());
        ck.n_gen = doc.at("n_gen").get<int>();
        ck.n_load = doc.at("n_load").get<int>();
        ck.n_gen_contingencies = doc.at("n_gen_contingencies").get<int>();
        r.config = config_from(doc.at("config"));
        r.primal = mlp_from(doc.at("primal"));
        r.primal_adam = adam_from(doc.at("primal_adam"));
        if (!doc.at("dual").is_null()) {
            r.dual = mlp_from(doc.at("dual"));
            r.dual_adam = adam_from(doc.at("dual_adam"));
        }
        if (!doc.at("frozen_dual").is_null()) r.frozen_dual = mlp_from(doc.at("frozen_dual"));
        const auto& t = doc.at("trainer");
        r.state.rho = t.at("rho").get<double>();
        r.state.v_prev = from_nullable(t.at("v_prev"));
        r.state.outer = t.at("outer").get<int>();
        r.state.step = t.at("step").get<std::int64_t>();
        for (const auto& h : doc.at("history"))
            r.history.push_back({h.at("outer_k").get<int>(), h.at("rho").get<double>(), h.at("rho_next").get<double>(),
                                 h.at("v_k").get<double>(), from_nullable(h.at("v_prev")),
                                 h.at("mean_objective").get<double>()});
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint to " + path.string());
    out << checkpoint_to_text(ck);
    if (!out) throw DataError("failed writing checkpoint to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_text(buf.str());
}

void check_compatible(const Checkpoint& ck, const GridModel& model) {
    const int dim = 2 * model.n_gen() + model.n_load();
    const int ck_dim = ck.run.primal.inputs();
    if (ck.n_gen != model.n_gen() || ck.n_load != model.n_load() || ck_dim != dim ||
        ck.run.primal.outputs() != model.n_gen())
        throw DataError("checkpoint/case dimension mismatch: expected dim(x)=" + std::to_string(dim) +
                        ", |G|=" + std::to_string(model.n_gen()) + "; checkpoint has dim(x)=" +
                        std::to_string(ck_dim) + ", |G|=" + std::to_string(ck.run.primal.outputs()));
}

}  // namespace scopf
