#include "hamdrift_cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hamdrift::cli {

using nlohmann::json;

namespace {

std::string term_pointer(const RunConfig& cfg, const std::string& term) {
  // map "F[2]" / "H[3]" back to the config location
  if (term.size() < 4) return "";
  char kind = term[0];
  int k = std::atoi(term.substr(2, term.size() - 3).c_str());
  const auto& list = kind == 'F' ? cfg.f_terms : cfg.h_terms;
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i].k == k)
      return std::string("/system/") + (kind == 'F' ? "f_terms/" : "h_terms/") +
             std::to_string(i);
  return "";
}

}  // namespace

PerturbedSystem RunConfig::build_system() const {
  if (version != 1)
    throw ConfigError("unsupported config version (expected 1)", "/version");
  if (q < 1) throw ConfigError("q must be a positive integer", "/system/q");
  if (!(e0 > 0)) throw ConfigError("e0 must be positive", "/system/e0");
  if (order < 1 || order > 3)
    throw ConfigError("averaging order must be between 1 and 3",
                      "/averaging/order");

  auto parse_at = [](const std::string& src, const std::string& ptr) {
    try {
      return Expr::parse(src);
    } catch (const ParseError& e) {
      throw ConfigError(e.what(), ptr);
    }
  };

  Expr h0_expr = parse_at(h0, "/system/h0");
  std::map<int, Expr> hmap, fmap;
  std::set<int> seen_h, seen_f;
  for (std::size_t i = 0; i < h_terms.size(); ++i) {
    const TermSpec& t = h_terms[i];
    std::string ptr = "/system/h_terms/" + std::to_string(i);
    if (t.k < 1) throw ConfigError("term index k must be >= 1", ptr + "/k");
    if (!seen_h.insert(t.k).second)
      throw ConfigError("duplicate H term index " + std::to_string(t.k),
                        ptr + "/k");
    hmap.emplace(t.k, parse_at(t.expr, ptr + "/expr"));
  }
  for (std::size_t i = 0; i < f_terms.size(); ++i) {
    const TermSpec& t = f_terms[i];
    std::string ptr = "/system/f_terms/" + std::to_string(i);
    if (t.k < 1) throw ConfigError("term index k must be >= 1", ptr + "/k");
    if (!seen_f.insert(t.k).second)
      throw ConfigError("duplicate F term index " + std::to_string(t.k),
                        ptr + "/k");
    fmap.emplace(t.k, parse_at(t.expr, ptr + "/expr"));
  }

  // every free parameter must be bound
  auto check_params = [&](const Expr& e, const std::string& ptr) {
    for (const std::string& p : e.parameters())
      if (!params.count(p))
        throw ConfigError("unbound parameter '" + p + "'", ptr);
  };
  check_params(h0_expr, "/system/h0");
  for (std::size_t i = 0; i < h_terms.size(); ++i)
    check_params(hmap.at(h_terms[i].k),
                 "/system/h_terms/" + std::to_string(i) + "/expr");
  for (std::size_t i = 0; i < f_terms.size(); ++i)
    check_params(fmap.at(f_terms[i].k),
                 "/system/f_terms/" + std::to_string(i) + "/expr");

  try {
    return PerturbedSystem(h0_expr, q, std::move(hmap), std::move(fmap), e0,
                           params);
  } catch (const SystemError& e) {
    throw ConfigError(e.what(), term_pointer(*this, e.offending_term));
  }
}

namespace {

const json* get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError("expected a number", ptr);
  return j.get<double>();
}

int as_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ConfigError("expected an integer", ptr);
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError("expected a string", ptr);
  return j.get<std::string>();
}

std::vector<TermSpec> parse_terms(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError("expected an array of {k, expr}", ptr);
  std::vector<TermSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& tj = j[i];
    std::string tptr = ptr + "/" + std::to_string(i);
    if (!tj.is_object()) throw ConfigError("expected an object", tptr);
    TermSpec t;
    const json* k = get_opt(tj, "k");
    const json* e = get_opt(tj, "expr");
    if (!k) throw ConfigError("missing field 'k'", tptr);
    if (!e) throw ConfigError("missing field 'expr'", tptr);
    t.k = as_int(*k, tptr + "/k");
    t.expr = as_string(*e, tptr + "/expr");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "");
  }
  if (!j.is_object()) throw ConfigError("top level must be an object", "");

  RunConfig cfg;
  const json* v = get_opt(j, "version");
  if (!v) throw ConfigError("missing field 'version'", "/version");
  cfg.version = as_int(*v, "/version");
  if (cfg.version != 1)
    throw ConfigError("unsupported config version (expected 1)", "/version");

  const json* sys = get_opt(j, "system");
  if (!sys || !sys->is_object())
    throw ConfigError("missing object 'system'", "/system");
  const json* h0 = get_opt(*sys, "h0");
  if (!h0) throw ConfigError("missing field 'h0'", "/system/h0");
  cfg.h0 = as_string(*h0, "/system/h0");
  const json* q = get_opt(*sys, "q");
  if (!q) throw ConfigError("missing field 'q'", "/system/q");
  cfg.q = as_int(*q, "/system/q");
  const json* e0 = get_opt(*sys, "e0");
  if (!e0) throw ConfigError("missing field 'e0'", "/system/e0");
  cfg.e0 = as_number(*e0, "/system/e0");
  if (const json* ht = get_opt(*sys, "h_terms"))
    cfg.h_terms = parse_terms(*ht, "/system/h_terms");
  if (const json* ft = get_opt(*sys, "f_terms"))
    cfg.f_terms = parse_terms(*ft, "/system/f_terms");
  if (const json* ps = get_opt(*sys, "params")) {
    if (!ps->is_object())
      throw ConfigError("expected an object of name -> value",
                        "/system/params");
    for (auto it = ps->begin(); it != ps->end(); ++it)
      cfg.params[it.key()] =
          as_number(it.value(), "/system/params/" + it.key());
  }

  if (const json* chart = get_opt(j, "chart")) {
    if (const json* ne = get_opt(*chart, "n_e"))
      cfg.n_e = static_cast<std::size_t>(as_int(*ne, "/chart/n_e"));
    if (const json* np = get_opt(*chart, "n_phi"))
      cfg.n_phi = static_cast<std::size_t>(as_int(*np, "/chart/n_phi"));
  }
  if (const json* avg = get_opt(j, "averaging")) {
    if (const json* o = get_opt(*avg, "order"))
      cfg.order = as_int(*o, "/averaging/order");
  }
  if (const json* sim = get_opt(j, "sim")) {
    if (const json* seeds = get_opt(*sim, "seeds")) {
      if (!seeds->is_array())
        throw ConfigError("expected an array of [x, y] pairs", "/sim/seeds");
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        const json& s = (*seeds)[i];
        std::string ptr = "/sim/seeds/" + std::to_string(i);
        if (!s.is_array() || s.size() != 2)
          throw ConfigError("expected [x, y]", ptr);
        cfg.seeds.push_back(
            {as_number(s[0], ptr + "/0"), as_number(s[1], ptr + "/1")});
      }
    }
    if (const json* te = get_opt(*sim, "t_end"))
      cfg.t_end = as_number(*te, "/sim/t_end");
    if (const json* tol = get_opt(*sim, "tol"))
      cfg.tol = as_number(*tol, "/sim/tol");
  }
  if (const json* od = get_opt(j, "out_dir"))
    cfg.out_dir = as_string(*od, "/out_dir");

  if (cfg.order < 1 || cfg.order > 3)
    throw ConfigError("averaging order must be between 1 and 3",
                      "/averaging/order");
  if (cfg.q < 1)
    throw ConfigError("q must be a positive integer", "/system/q");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", "");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

namespace {

double take(ParamEnv& env, const std::string& key, double fallback) {
  auto it = env.find(key);
  if (it == env.end()) return fallback;
  double v = it->second;
  env.erase(it);
  return v;
}

int take_int(ParamEnv& env, const std::string& key, int fallback,
             const std::string& id) {
  auto it = env.find(key);
  if (it == env.end()) return fallback;
  double v = it->second;
  env.erase(it);
  if (std::abs(v - std::round(v)) > 1e-9)
    throw ConfigError("structural parameter '" + key + "' of example '" + id +
                          "' must be an integer",
                      "");
  return static_cast<int>(std::round(v));
}

// decay exponent kappa -> the smallest (n, q) with n/q = kappa
std::pair<int, int> rationalize_exponent(double kappa, const std::string& id) {
  for (int q = 1; q <= 12; ++q) {
    double n = kappa * q;
    if (std::abs(n - std::round(n)) < 1e-9 && std::round(n) >= 1)
      return {static_cast<int>(std::round(n)), q};
  }
  throw ConfigError("parameter 'kappa' of example '" + id +
                        "' must be a rational n/q with q <= 12",
                    "");
}

const char* kPendulum = "1 - cos(x) + y^2/2";
const char* kHarmonic = "(x^2 + y^2)/2";

}  // namespace

std::vector<std::string> builtin_example_ids() {
  return {"wkb-linear", "ex1-pendulum-linear", "ex2-pendulum-x2y",
          "ex3-pendulum-x4y-x2y", "ex4-harmonic-cycle"};
}

RunConfig builtin_example(const std::string& id_or_prefix,
                          const ParamEnv& overrides) {
  std::string id = id_or_prefix;
  const std::vector<std::string> ids = builtin_example_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    // accept a unique prefix ("ex2" -> "ex2-pendulum-x2y")
    std::vector<std::string> hits;
    for (const std::string& full : ids)
      if (full.rfind(id_or_prefix, 0) == 0) hits.push_back(full);
    if (hits.size() == 1) id = hits[0];
  }

  ParamEnv ov = overrides;
  RunConfig cfg;

  if (id == "wkb-linear") {
    double kappa = take(ov, "kappa", 1.0);
    auto [n, q] = rationalize_exponent(kappa, id);
    cfg.h0 = kHarmonic;
    cfg.q = q;
    cfg.e0 = 4.0;
    cfg.f_terms = {{n, "gamma*y"}};
    cfg.params = {{"gamma", -0.5}};
    cfg.seeds = {{0.5, 0.0}};
  } else if (id == "ex1-pendulum-linear") {
    int q = take_int(ov, "q", 4, id);
    int n = take_int(ov, "n", 2, id);
    if (n < 2) throw ConfigError("example ex1 needs n >= 2 (l = 1)", "");
    cfg.h0 = kPendulum;
    cfg.q = q;
    cfg.e0 = 1.8;
    cfg.f_terms = {{1, "kap*y*sin(x)"}, {n, "lam*y"}};
    cfg.params = {{"kap", 1.0}, {"lam", -1.0}};
    cfg.seeds = {{0.5, 0.0}};
  } else if (id == "ex2-pendulum-x2y") {
    cfg.h0 = kPendulum;
    cfg.q = 2;
    cfg.e0 = 1.8;
    cfg.f_terms = {{1, "alpha*x^2*y"}, {2, "lam*y"}};
    cfg.params = {{"alpha", -2.0}, {"lam", 0.4}};
    cfg.seeds = {{0.5, 0.0}};
  } else if (id == "ex3-pendulum-x4y-x2y") {
    cfg.h0 = kPendulum;
    cfg.q = 2;
    cfg.e0 = 1.8;
    cfg.f_terms = {{1, "delta*x^4*y"}, {2, "alpha*x^2*y"}};
    cfg.params = {{"delta", -0.3}, {"alpha", -0.3}};
    cfg.seeds = {{0.5, 0.0}};
  } else if (id == "ex4-harmonic-cycle") {
    int q = take_int(ov, "q", 1, id);
    int n = take_int(ov, "n", 1, id);
    cfg.h0 = kHarmonic;
    cfg.q = q;
    cfg.e0 = 4.0;
    cfg.f_terms = {{n, "y*(lam + kap*x - mu*(x^2+y^2)/2)"}};
    cfg.params = {{"lam", 0.5}, {"mu", 0.5}, {"kap", 0.0}};
    // energies 0.5, 0.9, 1.5 on the y = 0 section
    cfg.seeds = {{-1.0, 0.0},
                 {-1.3416407864998738, 0.0},
                 {-1.7320508075688772, 0.0}};
  } else {
    throw ConfigError("unknown example id '" + id + "'", "");
  }

  for (auto& [k, v] : ov) {
    if (!cfg.params.count(k))
      throw ConfigError("example '" + id + "' has no parameter '" + k + "'",
                        "");
    cfg.params[k] = v;
  }
  return cfg;
}

ParamEnv parse_param_list(const std::vector<std::string>& specs) {
  ParamEnv env;
  for (const std::string& spec : specs) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError("malformed --param entry '" + item +
                              "' (expected name=value)",
                          "");
      std::string name = item.substr(0, eq);
      std::string val = item.substr(eq + 1);
      char* end = nullptr;
      double v = std::strtod(val.c_str(), &end);
      if (end == val.c_str() || *end != '\0')
        throw ConfigError("malformed value in --param entry '" + item + "'",
                          "");
      env[name] = v;
    }
  }
  return env;
}

}  // namespace hamdrift::cli
