#include "matchq/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "matchq/error.hpp"

namespace matchq {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 8> kNames{{
    {ExperimentKind::Fig2MatchingVsK, "fig2_matching_vs_K"},
    {ExperimentKind::Fig3Abandonment, "fig3_abandonment"},
    {ExperimentKind::Fig4PathsVsK, "fig4_paths_vs_K"},
    {ExperimentKind::Fig5Table1Stickiness, "fig5_table1_stickiness"},
    {ExperimentKind::LittlesLaw, "littles_law"},
    {ExperimentKind::CostConvergence, "cost_convergence"},
    {ExperimentKind::OracleValidation, "oracle_validation"},
    {ExperimentKind::Custom, "custom"},
}};

bool is_sweep(ExperimentKind k) {
    return k == ExperimentKind::Fig2MatchingVsK || k == ExperimentKind::Fig3Abandonment ||
           k == ExperimentKind::Fig4PathsVsK;
}

// Reads typed fields from one JSON object, recording every problem instead
// of stopping at the first.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {}

    bool has(const char* key) const { return obj_.contains(key); }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        read(obj_.at(key), out, where(key));
    }

    template <class T>
    void require(const char* key, T& out) {
        if (!obj_.contains(key)) {
            errors_.push_back(where(key) + ": required");
            seen_.insert(key);
            return;
        }
        get(key, out);
    }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!obj_.contains(key)) return nullptr;
        if (!obj_.at(key).is_object()) {
            errors_.push_back(where(key) + ": expected an object");
            return nullptr;
        }
        return &obj_.at(key);
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) errors_.push_back(where(it.key()) + ": unknown key");
    }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;

    void read(const json& v, double& out, const std::string& w) {
        if (!v.is_number()) return errors_.push_back(w + ": expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) errors_.push_back(w + ": must be finite");
    }
    void read(const json& v, int& out, const std::string& w) {
        if (!v.is_number_integer()) return errors_.push_back(w + ": expected an integer");
        out = v.get<int>();
    }
    void read(const json& v, unsigned& out, const std::string& w) {
        if (!v.is_number_unsigned()) return errors_.push_back(w + ": expected a nonnegative integer");
        out = v.get<unsigned>();
    }
    void read(const json& v, std::uint64_t& out, const std::string& w) {
        if (!v.is_number_unsigned()) return errors_.push_back(w + ": expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }
    void read(const json& v, std::string& out, const std::string& w) {
        if (!v.is_string()) return errors_.push_back(w + ": expected a string");
        out = v.get<std::string>();
    }
    template <class T>
    void read(const json& v, std::vector<T>& out, const std::string& w) {
        if (!v.is_array()) return errors_.push_back(w + ": expected an array");
        out.assign(v.size(), T{});
        for (std::size_t k = 0; k < v.size(); ++k) read(v[k], out[k], w + "[" + std::to_string(k) + "]");
    }
    void read(const json& v, std::array<double, 2>& out, const std::string& w) {
        if (!v.is_array() || v.size() != 2) return errors_.push_back(w + ": expected [low, high]");
        read(v[0], out[0], w + "[0]");
        read(v[1], out[1], w + "[1]");
    }
};

void read_size(Reader& r, const char* key, std::size_t& out) {
    std::uint64_t v = out;
    r.get(key, v);
    out = static_cast<std::size_t>(v);
}

void read_sizes(Reader& r, const char* key, std::vector<std::size_t>& out) {
    std::vector<std::uint64_t> v(out.begin(), out.end());
    r.get(key, v);
    out.assign(v.begin(), v.end());
}

template <class F>
void check_params(std::vector<std::string>& errors, const std::string& block, F&& validate) {
    try {
        validate();
    } catch (const std::exception& e) {
        errors.push_back(block + ": " + e.what());
    }
}

void collect_violations(const RunConfig& c, std::vector<std::string>& errors) {
    const auto k = c.kind;
    if (c.reps == 0) errors.push_back("reps: must be at least 1");
    if (c.N == 0) errors.push_back("grid.N: must be at least 1");
    if (!(c.T > 0.0)) errors.push_back("grid.T: must be positive");
    if (c.precision < 3 || c.precision > 17) errors.push_back("format.precision: must lie in [3, 17]");

    const bool wants_family = k == ExperimentKind::LittlesLaw || k == ExperimentKind::CostConvergence;
    if (wants_family && !c.family) errors.push_back("family: required for " + std::string(kind_name(k)));
    if (!wants_family && k != ExperimentKind::Custom && c.family)
        errors.push_back("family: not used by " + std::string(kind_name(k)));
    if (k != ExperimentKind::Custom && c.limit) errors.push_back("limit: not used by " + std::string(kind_name(k)));
    if (k == ExperimentKind::Custom && !c.limit && !c.family)
        errors.push_back("custom: needs a limit block, a family block, or both");
    if (k == ExperimentKind::OracleValidation && !c.oracle) errors.push_back("system: required for oracle_validation");
    if (k != ExperimentKind::OracleValidation && c.oracle) errors.push_back("system: only used by oracle_validation");

    if (c.family) check_params(errors, "family", [&] { c.family->validate(); });
    if (c.limit) check_params(errors, "limit", [&] { c.limit->validate(); });
    if (c.family && c.limit && c.family->K != c.limit->K) errors.push_back("family and limit disagree on K");
    if (c.oracle) {
        check_params(errors, "system", [&] { c.oracle->system.validate(); });
        if (c.oracle->cap < 1) errors.push_back("oracle.cap: must be at least 1");
        if (c.oracle->cap_check <= c.oracle->cap) errors.push_back("oracle.cap_check: must exceed oracle.cap");
        if (!(c.oracle->t > 0.0)) errors.push_back("oracle.t: must be positive");
    }
    if (is_sweep(k)) {
        if (c.sweep.K_list.empty()) errors.push_back("sweep.K: must list at least one K");
        for (auto K : c.sweep.K_list)
            if (K < 2) errors.push_back("sweep.K: every K must be at least 2");
        if (!(c.sweep.sigma > 0.0)) errors.push_back("sweep.sigma: must be positive");
        auto range = [&](const char* name, const std::array<double, 2>& r, double floor) {
            if (!(r[0] <= r[1])) errors.push_back(std::string("sweep.") + name + ": low exceeds high");
            if (r[0] < floor) errors.push_back(std::string("sweep.") + name + ": below the allowed minimum");
        };
        range("x", c.sweep.x, 0.0);
        range("beta", c.sweep.beta, -1e300);
        range("delta", c.sweep.delta, 0.0);
    }
    if (k == ExperimentKind::Fig5Table1Stickiness) {
        if (c.table.K < 2) errors.push_back("table1.K: must be at least 2");
        if (c.table.betas.size() < 2) errors.push_back("table1.betas: need at least two values");
        if (!(c.table.sigma > 0.0)) errors.push_back("table1.sigma: must be positive");
        if (c.table.zero_tol < 0.0) errors.push_back("table1.zero_tol: must be nonnegative");
    }
    if (k == ExperimentKind::CostConvergence) {
        const std::size_t K = c.family ? c.family->K : c.cost.penalty.size();
        check_params(errors, "cost", [&] { c.cost.validate(K); });
    }
    if (k == ExperimentKind::LittlesLaw && c.little_samples == 0)
        errors.push_back("little.samples: must be at least 1");
    if ((k == ExperimentKind::CostConvergence || k == ExperimentKind::LittlesLaw) && c.reps < 2)
        errors.push_back("reps: this experiment needs at least 2");
}

void apply_defaults(RunConfig& c) {
    switch (c.kind) {
        case ExperimentKind::Fig2MatchingVsK:
        case ExperimentKind::Fig3Abandonment:
            c.reps = 50;
            c.sweep.K_list = {2, 3, 4, 5, 20, 80, 500};
            break;
        case ExperimentKind::Fig4PathsVsK:
            c.reps = 1;
            c.sweep.K_list = {2, 3, 4, 5};
            break;
        case ExperimentKind::Fig5Table1Stickiness: c.reps = 100; break;
        case ExperimentKind::LittlesLaw:
        case ExperimentKind::CostConvergence: c.reps = 200; break;
        case ExperimentKind::OracleValidation: c.reps = 100000; break;
        case ExperimentKind::Custom: c.reps = 1; break;
    }
}

}  // namespace

std::string_view kind_name(ExperimentKind k) {
    for (const auto& [kind, name] : kNames)
        if (kind == k) return name;
    return "unknown";
}

std::optional<ExperimentKind> kind_from_name(std::string_view name) {
    for (const auto& [kind, n] : kNames)
        if (n == name) return kind;
    return std::nullopt;
}

RunConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SchemaError({std::string("not valid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw SchemaError({"top level must be an object"});

    std::vector<std::string> errors;
    RunConfig c;
    Reader top(doc, "", errors);

    std::string kind;
    top.require("experiment", kind);
    if (!kind.empty()) {
        if (auto k = kind_from_name(kind)) c.kind = *k;
        else errors.push_back("experiment: unknown kind '" + kind + "'");
    }
    if (!errors.empty()) {
        top.finish();
        throw SchemaError(errors);
    }
    apply_defaults(c);

    top.get("seed", c.master_seed);
    read_size(top, "reps", c.reps);
    read_size(top, "limit_paths", c.limit_paths);
    top.get("threads", c.threads);
    top.get("output", c.output);

    if (const json* g = top.child("grid")) {
        Reader r(*g, "grid", errors);
        read_size(r, "N", c.N);
        r.get("T", c.T);
        r.finish();
    }
    if (const json* f = top.child("format")) {
        Reader r(*f, "format", errors);
        r.get("precision", c.precision);
        r.finish();
    }
    if (const json* f = top.child("family")) {
        Reader r(*f, "family", errors);
        RegimeFamily fam;
        read_size(r, "K", fam.K);
        r.require("lambda0", fam.lambda0);
        r.require("beta", fam.beta);
        r.require("delta", fam.delta_limit);
        r.require("x", fam.x);
        r.require("n", fam.n_list);
        if (!r.has("K")) fam.K = fam.beta.size();
        r.finish();
        c.family = fam;
    }
    if (const json* l = top.child("limit")) {
        Reader r(*l, "limit", errors);
        LimitParams p;
        r.require("x", p.x);
        r.require("beta", p.beta);
        r.require("sigma", p.sigma);
        r.require("delta", p.delta);
        p.K = p.x.size();
        r.finish();
        c.limit = p;
    }
    if (const json* s = top.child("system")) {
        Reader r(*s, "system", errors);
        OracleSpec o;
        r.require("lambda", o.system.lambda);
        r.require("delta", o.system.delta);
        r.get("q0", o.system.q0);
        o.system.K = o.system.lambda.size();
        if (!r.has("q0")) o.system.q0.assign(o.system.K, 0);
        r.finish();
        c.oracle = o;
    }
    if (const json* o = top.child("oracle")) {
        Reader r(*o, "oracle", errors);
        if (!c.oracle) errors.push_back("oracle: needs a system block");
        OracleSpec tmp = c.oracle.value_or(OracleSpec{});
        r.get("cap", tmp.cap);
        r.get("cap_check", tmp.cap_check);
        r.get("t", tmp.t);
        r.finish();
        if (c.oracle) c.oracle = tmp;
    }
    if (const json* s = top.child("sweep")) {
        Reader r(*s, "sweep", errors);
        read_sizes(r, "K", c.sweep.K_list);
        r.get("sigma", c.sweep.sigma);
        r.get("x", c.sweep.x);
        r.get("beta", c.sweep.beta);
        r.get("delta", c.sweep.delta);
        r.finish();
        if (!is_sweep(c.kind)) errors.push_back("sweep: only used by the K sweeps");
    }
    if (const json* t = top.child("table1")) {
        Reader r(*t, "table1", errors);
        read_size(r, "K", c.table.K);
        r.get("betas", c.table.betas);
        r.get("other_beta", c.table.other_beta);
        r.get("sigma", c.table.sigma);
        r.get("zero_tol", c.table.zero_tol);
        r.finish();
        if (c.kind != ExperimentKind::Fig5Table1Stickiness)
            errors.push_back("table1: only used by fig5_table1_stickiness");
    }
    if (c.kind == ExperimentKind::CostConvergence) {
        const std::size_t K = c.family ? c.family->K : 0;
        c.cost.gamma = 13.0;
        c.cost.penalty.assign(K, 1.0);
        c.cost.holding.assign(K, 1.0);
    }
    if (const json* k = top.child("cost")) {
        Reader r(*k, "cost", errors);
        r.get("gamma", c.cost.gamma);
        r.get("penalty", c.cost.penalty);
        r.get("holding", c.cost.holding);
        r.get("power", c.cost.power);
        r.get("T_max", c.cost.T_max);
        r.get("l", c.cost.growth_level);
        r.finish();
        if (c.kind != ExperimentKind::CostConvergence) errors.push_back("cost: only used by cost_convergence");
    }
    if (const json* l = top.child("little")) {
        Reader r(*l, "little", errors);
        read_size(r, "samples", c.little_samples);
        r.finish();
        if (c.kind != ExperimentKind::LittlesLaw) errors.push_back("little: only used by littles_law");
    }
    top.finish();

    collect_violations(c, errors);
    if (!errors.empty()) throw SchemaError(errors);
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError({"cannot read config file " + file.string()});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate_config(const RunConfig& c) {
    std::vector<std::string> errors;
    collect_violations(c, errors);
    if (!errors.empty()) throw SchemaError(errors);
}

std::string canonical_json(const RunConfig& c) {
    json j;
    j["experiment"] = std::string(kind_name(c.kind));
    j["seed"] = c.master_seed;
    j["reps"] = c.reps;
    j["limit_paths"] = c.limit_paths;
    j["grid"] = {{"N", c.N}, {"T", c.T}};
    j["format"] = {{"precision", c.precision}};
    if (c.family)
        j["family"] = {{"K", c.family->K},         {"lambda0", c.family->lambda0}, {"beta", c.family->beta},
                       {"delta", c.family->delta_limit}, {"x", c.family->x},   {"n", c.family->n_list}};
    if (c.limit)
        j["limit"] = {{"x", c.limit->x}, {"beta", c.limit->beta}, {"sigma", c.limit->sigma}, {"delta", c.limit->delta}};
    if (c.oracle) {
        j["system"] = {{"lambda", c.oracle->system.lambda}, {"delta", c.oracle->system.delta}, {"q0", c.oracle->system.q0}};
        j["oracle"] = {{"cap", c.oracle->cap}, {"cap_check", c.oracle->cap_check}, {"t", c.oracle->t}};
    }
    if (is_sweep(c.kind))
        j["sweep"] = {{"K", c.sweep.K_list}, {"sigma", c.sweep.sigma}, {"x", c.sweep.x},
                      {"beta", c.sweep.beta}, {"delta", c.sweep.delta}};
    if (c.kind == ExperimentKind::Fig5Table1Stickiness)
        j["table1"] = {{"K", c.table.K}, {"betas", c.table.betas}, {"other_beta", c.table.other_beta},
                       {"sigma", c.table.sigma}, {"zero_tol", c.table.zero_tol}};
    if (c.kind == ExperimentKind::CostConvergence)
        j["cost"] = {{"gamma", c.cost.gamma}, {"penalty", c.cost.penalty}, {"holding", c.cost.holding},
                     {"power", c.cost.power}, {"T_max", c.cost.T_max}, {"l", c.cost.growth_level}};
    if (c.kind == ExperimentKind::LittlesLaw) j["little"] = {{"samples", c.little_samples}};
    // threads and output are deliberately left out: they do not change the data.
    return j.dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace matchq
