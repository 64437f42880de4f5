#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "partfree/landauer.hpp"
#include "partfree/model.hpp"
#include "partfree/protocol.hpp"

namespace partfree {

struct NumericsConfig {
    double dt = 0.02;
    double dt_sample = 0.1;
    double horizon = 150.0;  // T
    std::vector<Index> n_list{0};
    QuadratureSpec quad;
    Index spectrum_points = 200;
    double margin = 0.9;
    double tolerance = 0.02;
};

struct OutputConfig {
    std::string directory = "out";
    bool emit_transient = true;
    bool emit_spectrum = true;
    bool emit_steady = true;
};

/// Everything a run needs. The lead truncation N lives in system.lead.trunc_len.
struct RunConfig {
    SystemSpec system;
    BiasProtocol protocol;
    NumericsConfig numerics;
    OutputConfig output;
};

struct FieldError {
    std::string key;
    int line = 0;  // 1-based, 0 when unknown
    std::string message;

    std::string describe() const {
        std::string out = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
        return out + (key.empty() ? std::string() : "`" + key + "`: ") + message;
    }
};

struct ConfigResult {
    std::optional<RunConfig> config;
    std::vector<FieldError> errors;

    bool ok() const { return config.has_value() && errors.empty(); }
};

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest(const std::string& key, const std::vector<std::string>& known) {
    std::string best;
    std::size_t best_d = 3;  // suggest only close matches
    for (const auto& k : known) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

inline const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"sample", {"site_count", "h", "h_imag", "contact1", "contact2"}},
        {"lead", {"t_hop"}},
        {"coupling", {"tau"}},
        {"thermal", {"beta", "mu"}},
        {"protocol", {"v", "t1", "shape"}},
        {"numerics",
         {"N", "dt", "dt_sample", "T", "n_list", "quad_panels", "quad_nodes", "edge_inset", "spectrum_points",
          "margin", "tolerance"}},
        {"output", {"directory", "emit_transient", "emit_spectrum", "emit_steady"}},
    };
    return keys;
}

class Reader {
public:
    explicit Reader(std::vector<FieldError>& errors) : errors_(errors) {}

    void error(const std::string& key, const YAML::Node& node, const std::string& message) {
        const int line = node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
        errors_.push_back({key, line, message});
    }

    template <class T>
    std::optional<T> get(const YAML::Node& section, const std::string& section_name, const std::string& key,
                         const char* type_name, bool required) {
        const std::string full = section_name + "." + key;
        const YAML::Node node = section.IsMap() ? section[key] : YAML::Node();
        if (!node.IsDefined() || node.IsNull()) {
            if (required) error(full, section, "missing required field");
            return std::nullopt;
        }
        try {
            if (!node.IsScalar()) throw YAML::BadConversion(node.Mark());
            return node.as<T>();
        } catch (const YAML::Exception&) {
            error(full, node, std::string("expected ") + type_name);
            return std::nullopt;
        }
    }

    template <class T>
    std::optional<std::vector<T>> get_list(const YAML::Node& section, const std::string& section_name,
                                           const std::string& key, const char* type_name, bool required) {
        const std::string full = section_name + "." + key;
        const YAML::Node node = section.IsMap() ? section[key] : YAML::Node();
        if (!node.IsDefined() || node.IsNull()) {
            if (required) error(full, section, "missing required field");
            return std::nullopt;
        }
        if (!node.IsSequence()) {
            error(full, node, std::string("expected a list of ") + type_name);
            return std::nullopt;
        }
        std::vector<T> out;
        for (const auto& item : node) {
            try {
                out.push_back(item.as<T>());
            } catch (const YAML::Exception&) {
                error(full, item, std::string("expected a list of ") + type_name);
                return std::nullopt;
            }
        }
        return out;
    }

private:
    std::vector<FieldError>& errors_;
};

}  // namespace detail

/// Parses and validates a YAML run description with sections sample, lead, coupling, thermal,
/// protocol, numerics and output. Unknown keys are errors.
inline ConfigResult parse_config(const std::string& text) {
    ConfigResult result;
    auto& errors = result.errors;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        errors.push_back({"", e.mark.line + 1, "syntax error: " + e.msg});
        return result;
    }
    if (!root.IsMap()) {
        errors.push_back({"", 0, "document must be a mapping of sections"});
        return result;
    }

    const auto& schema = detail::schema();
    std::vector<std::string> sections;
    for (const auto& [name, _] : schema) sections.push_back(name);
    detail::Reader rd(errors);

    for (const auto& entry : root) {
        const auto name = entry.first.as<std::string>();
        auto found = schema.find(name);
        if (found == schema.end()) {
            const std::string hint = detail::nearest(name, sections);
            rd.error(name, entry.first,
                     "unknown section" + (hint.empty() ? std::string() : " (did you mean `" + hint + "`?)"));
            continue;
        }
        if (!entry.second.IsMap()) {
            rd.error(name, entry.second, "section must be a mapping");
            continue;
        }
        for (const auto& field : entry.second) {
            const auto key = field.first.as<std::string>();
            if (std::find(found->second.begin(), found->second.end(), key) == found->second.end()) {
                const std::string hint = detail::nearest(key, found->second);
                rd.error(name + "." + key, field.first,
                         "unknown key" + (hint.empty() ? std::string() : " (did you mean `" + name + "." + hint + "`?)"));
            }
        }
    }

    RunConfig cfg;
    const YAML::Node sample = root["sample"];
    const YAML::Node lead = root["lead"];
    const YAML::Node coupling = root["coupling"];
    const YAML::Node thermal = root["thermal"];
    const YAML::Node protocol = root["protocol"];
    const YAML::Node numerics = root["numerics"];
    const YAML::Node output = root["output"];
    if (!sample.IsDefined()) errors.push_back({"sample", 0, "missing required section"});
    if (!coupling.IsDefined()) errors.push_back({"coupling", 0, "missing required section"});
    if (!thermal.IsDefined()) errors.push_back({"thermal", 0, "missing required section"});
    if (!protocol.IsDefined()) errors.push_back({"protocol", 0, "missing required section"});

    // sample
    if (auto n = rd.get<long>(sample, "sample", "site_count", "an integer", false)) {
        if (*n <= 0) rd.error("sample.site_count", sample["site_count"], "must be > 0 (got " + std::to_string(*n) + ")");
        else cfg.system.sample.site_count = Index(*n);
    }
    const Index ns = cfg.system.sample.site_count;
    if (auto h = rd.get_list<double>(sample, "sample", "h", "numbers", true)) {
        if (Index(h->size()) != ns * ns) {
            rd.error("sample.h", sample["h"],
                     "must hold site_count^2 = " + std::to_string(ns * ns) + " entries in row-major order (got " +
                         std::to_string(h->size()) + ")");
        } else {
            cfg.system.sample.h_sample = CMatrix::Zero(ns, ns);
            for (Index i = 0; i < ns; ++i)
                for (Index j = 0; j < ns; ++j) cfg.system.sample.h_sample(i, j) = (*h)[std::size_t(i * ns + j)];
            if (auto hi = rd.get_list<double>(sample, "sample", "h_imag", "numbers", false)) {
                if (Index(hi->size()) != ns * ns)
                    rd.error("sample.h_imag", sample["h_imag"], "must hold site_count^2 entries");
                else
                    for (Index i = 0; i < ns; ++i)
                        for (Index j = 0; j < ns; ++j)
                            cfg.system.sample.h_sample(i, j) += Complex(0.0, (*hi)[std::size_t(i * ns + j)]);
            }
            const CMatrix& hs = cfg.system.sample.h_sample;
            if (!hs.allFinite()) rd.error("sample.h", sample["h"], "entries must be finite");
            else if ((hs - hs.adjoint()).norm() > 1e-12 * std::max(1.0, hs.norm()))
                rd.error("sample.h", sample["h"], "matrix must be Hermitian");
        }
    }
    for (const char* key : {"contact1", "contact2"}) {
        if (auto c = rd.get<long>(sample, "sample", key, "an integer", false)) {
            if (*c < 0 || *c >= ns)
                rd.error(std::string("sample.") + key, sample[key],
                         "must lie in [0, site_count) = [0, " + std::to_string(ns) + ") (got " + std::to_string(*c) + ")");
            else (std::string(key) == "contact1" ? cfg.system.sample.contact1 : cfg.system.sample.contact2) = Index(*c);
        }
    }

    // lead, coupling, thermal
    if (auto t = rd.get<double>(lead, "lead", "t_hop", "a number", false)) {
        if (!(*t > 0.0) || !std::isfinite(*t)) rd.error("lead.t_hop", lead["t_hop"], "must be > 0");
        else cfg.system.lead.t_hop = *t;
    }
    if (auto tau = rd.get<double>(coupling, "coupling", "tau", "a number", true)) {
        if (!(*tau >= 0.0) || !std::isfinite(*tau))
            rd.error("coupling.tau", coupling["tau"], "must be >= 0 (got " + YAML::Dump(coupling["tau"]) + ")");
        else cfg.system.coupling.tau = *tau;
    }
    if (auto beta = rd.get<double>(thermal, "thermal", "beta", "a number", true)) {
        if (!(*beta >= 0.0) || !std::isfinite(*beta)) rd.error("thermal.beta", thermal["beta"], "must be finite and >= 0");
        else cfg.system.thermal.beta = *beta;
    }
    if (auto mu = rd.get<double>(thermal, "thermal", "mu", "a number", false)) {
        if (!std::isfinite(*mu)) rd.error("thermal.mu", thermal["mu"], "must be finite");
        else cfg.system.thermal.mu = *mu;
    }

    // protocol
    if (auto v = rd.get<double>(protocol, "protocol", "v", "a number", true)) {
        if (!(*v >= 0.0) || !std::isfinite(*v)) rd.error("protocol.v", protocol["v"], "must be >= 0");
        else cfg.protocol.v = *v;
    }
    if (auto shape = rd.get<std::string>(protocol, "protocol", "shape", "a string", false)) {
        try {
            cfg.protocol.shape = parse_switch_shape(*shape);
        } catch (const std::invalid_argument& e) {
            rd.error("protocol.shape", protocol["shape"], e.what());
        }
    }
    if (auto t1 = rd.get<double>(protocol, "protocol", "t1", "a number", false)) cfg.protocol.t1 = *t1;
    if (cfg.protocol.shape == SwitchShape::sudden && cfg.protocol.t1 != 0.0)
        rd.error("protocol.t1", protocol["t1"], "must be 0 for the sudden shape");
    if (cfg.protocol.shape != SwitchShape::sudden && !(cfg.protocol.t1 > 0.0))
        rd.error("protocol.t1", protocol["t1"], "must be > 0 for linear and smooth_cos shapes");

    // numerics
    auto& num = cfg.numerics;
    if (auto n = rd.get<long>(numerics, "numerics", "N", "an integer", false)) {
        if (*n < 2) rd.error("numerics.N", numerics["N"], "must be >= 2");
        else cfg.system.lead.trunc_len = Index(*n);
    }
    auto positive = [&](const char* key, double& target) {
        if (auto x = rd.get<double>(numerics, "numerics", key, "a number", false)) {
            if (!(*x > 0.0) || !std::isfinite(*x)) rd.error(std::string("numerics.") + key, numerics[key], "must be > 0");
            else target = *x;
        }
    };
    positive("dt", num.dt);
    positive("dt_sample", num.dt_sample);
    positive("T", num.horizon);
    positive("tolerance", num.tolerance);
    if (auto sites = rd.get_list<long>(numerics, "numerics", "n_list", "integers", false)) {
        num.n_list.clear();
        for (long n : *sites) {
            if (n < 0 || n >= cfg.system.lead.trunc_len - 1)
                rd.error("numerics.n_list", numerics["n_list"],
                         "site " + std::to_string(n) + " must satisfy 0 <= n < N-1 = " +
                             std::to_string(cfg.system.lead.trunc_len - 1));
            num.n_list.push_back(Index(n));
        }
        if (num.n_list.empty()) rd.error("numerics.n_list", numerics["n_list"], "must not be empty");
    }
    if (auto p = rd.get<int>(numerics, "numerics", "quad_panels", "an integer", false)) {
        if (*p < 4) rd.error("numerics.quad_panels", numerics["quad_panels"], "must be >= 4");
        else num.quad.panels = *p;
    }
    if (auto p = rd.get<int>(numerics, "numerics", "quad_nodes", "an integer", false)) {
        if (*p < 1) rd.error("numerics.quad_nodes", numerics["quad_nodes"], "must be >= 1");
        else num.quad.nodes_per_panel = *p;
    }
    if (auto x = rd.get<double>(numerics, "numerics", "edge_inset", "a number", false)) {
        if (!(*x > 0.0 && *x < 0.5)) rd.error("numerics.edge_inset", numerics["edge_inset"], "must lie in (0, 0.5)");
        else num.quad.edge_inset = *x;
    }
    if (auto p = rd.get<long>(numerics, "numerics", "spectrum_points", "an integer", false)) {
        if (*p < 1) rd.error("numerics.spectrum_points", numerics["spectrum_points"], "must be >= 1");
        else num.spectrum_points = Index(*p);
    }
    if (auto m = rd.get<double>(numerics, "numerics", "margin", "a number", false)) {
        if (!(*m > 0.0 && *m < 1.0)) rd.error("numerics.margin", numerics["margin"], "must lie in (0, 1)");
        else num.margin = *m;
    }

    // output
    if (auto d = rd.get<std::string>(output, "output", "directory", "a string", false)) cfg.output.directory = *d;
    if (auto b = rd.get<bool>(output, "output", "emit_transient", "a boolean", false)) cfg.output.emit_transient = *b;
    if (auto b = rd.get<bool>(output, "output", "emit_spectrum", "a boolean", false)) cfg.output.emit_spectrum = *b;
    if (auto b = rd.get<bool>(output, "output", "emit_steady", "a boolean", false)) cfg.output.emit_steady = *b;

    if (errors.empty()) result.config = std::move(cfg);
    return result;
}

}  // namespace partfree
