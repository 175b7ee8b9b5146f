#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "cfdecomp/error.hpp"
#include "cfdecomp/links.hpp"
#include "cfdecomp/melly.hpp"
#include "cfdecomp/report_io.hpp"

namespace cfdecomp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed field access that records problems instead of throwing.
class Fields {
 public:
  Fields(const json& doc, Problems& problems, std::string prefix = "")
      : doc_(doc), problems_(problems), prefix_(std::move(prefix)) {}

  bool has(const char* key) const { return doc_.is_object() && doc_.contains(key); }

  template <typename T>
  std::optional<T> get(const char* key, bool required = false) const {
    if (!has(key)) {
      if (required) problems_.add(name(key) + ": required field is missing");
      return std::nullopt;
    }
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.add(name(key) + ": wrong type");
      return std::nullopt;
    }
  }

  template <typename T>
  void read(const char* key, T& target) const {
    if (auto v = get<T>(key)) target = *v;
  }

  // Runs `parse` on the string field and records its ValidationError.
  template <typename Parse>
  void parse(const char* key, Parse&& fn) const {
    if (auto v = get<std::string>(key)) {
      try {
        fn(*v);
      } catch (const ValidationError& e) {
        problems_.add(name(key) + ": " + e.what());
      }
    }
  }

  const json& sub(const char* key) const { return doc_.at(key); }
  std::string name(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  Problems& problems() const { return problems_; }

 private:
  const json& doc_;
  Problems& problems_;
  std::string prefix_;
};

std::string input_path(const ConfigDocument& config, const Fields& f, const char* key) {
  const auto rel = f.get<std::string>(key, true);
  if (!rel) return {};
  const std::string p = config.path(*rel);
  if (!fs::exists(p)) f.problems().add(f.name(key) + ": file not found: " + p);
  return p;
}

std::string output_dir(const ConfigDocument& config, const Fields& f) {
  return config.path(f.get<std::string>("output").value_or("out"));
}

FactorSchema read_schema(const Fields& f) {
  if (!f.has("schema")) {
    f.problems().add("schema: required field is missing");
    return {};
  }
  try {
    return schema_from_json(f.sub("schema"));
  } catch (const ValidationError& e) {
    f.problems().add(std::string("schema: ") + e.what());
    return {};
  }
}

std::optional<std::array<std::string, 2>> read_periods(const Fields& f) {
  const auto p = f.get<std::vector<std::string>>("periods");
  if (!p) return std::nullopt;
  if (p->size() != 2 || (*p)[0] == (*p)[1]) {
    f.problems().add("periods: need two distinct labels (base, comparison)");
    return std::nullopt;
  }
  return std::array<std::string, 2>{(*p)[0], (*p)[1]};
}

GridSpec read_grid(const Fields& f) {
  GridSpec grid;
  if (!f.has("grid")) return grid;
  const json& g = f.sub("grid");
  if (g.is_string() || g.is_number()) {
    const std::string text = g.is_string() ? g.get<std::string>() : std::to_string(g.get<long long>());
    if (text == "all") {
      grid.kind = GridSpec::Kind::all_unique;
    } else {
      try {
        const long long points = std::stoll(text);
        if (points < 2) throw std::invalid_argument("");
        grid.points = static_cast<std::size_t>(points);
      } catch (const std::exception&) {
        f.problems().add("grid: expected a point count of at least 2 or \"all\"");
      }
    }
    return grid;
  }
  Fields gf(g, f.problems(), "grid");
  gf.parse("kind", [&](const std::string& k) {
    if (k == "all_unique") grid.kind = GridSpec::Kind::all_unique;
    else if (k == "quantile_spaced") grid.kind = GridSpec::Kind::quantile_spaced;
    else throw ValidationError("unknown grid kind '" + k + "'");
  });
  gf.read("points", grid.points);
  gf.read("trim", grid.trim);
  if (grid.points < 2) f.problems().add("grid.points: need at least 2");
  if (!(grid.trim >= 0.0 && grid.trim < 0.5)) f.problems().add("grid.trim: must lie in [0, 0.5)");
  return grid;
}

Link read_link(const Fields& f) {
  Link link = Link::logit;
  f.parse("link", [&](const std::string& s) { link = parse_link(s); });
  return link;
}

std::vector<double> read_taus(const Fields& f) {
  if (!f.has("taus")) return default_tau_grid(99);
  const json& t = f.sub("taus");
  if (t.is_number_unsigned() || t.is_number_integer()) {
    const long long n = t.get<long long>();
    if (n < 3) {
      f.problems().add("taus: need at least 3 grid points");
      return {};
    }
    return default_tau_grid(static_cast<std::size_t>(n));
  }
  const auto levels = f.get<std::vector<double>>("taus");
  if (!levels) return {};
  for (std::size_t j = 0; j < levels->size(); ++j)
    if (!((*levels)[j] > 0.0 && (*levels)[j] < 1.0) || (j > 0 && !((*levels)[j] > (*levels)[j - 1]))) {
      f.problems().add("taus: levels must be increasing inside (0, 1)");
      return {};
    }
  return *levels;
}

}  // namespace

void Problems::check(const std::string& what) const {
  if (messages_.empty()) return;
  std::string text = what + ": " + std::to_string(messages_.size()) + " problem(s)";
  for (const auto& m : messages_) text += "\n  - " + m;
  throw ValidationError(text);
}

std::string ConfigDocument::path(const std::string& relative) const {
  const fs::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

ConfigDocument load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  ConfigDocument out;
  try {
    out.doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!out.doc.is_object()) throw ValidationError("config " + path + " must be a JSON object");
  out.base_dir = fs::path(path).parent_path().string();
  return out;
}

void apply_overrides(json& doc, const Overrides& o) {
  if (o.seed) doc["seed"] = *o.seed;
  if (o.reps) doc["bootstrap"]["replications"] = *o.reps;
  if (o.link) doc["link"] = *o.link;
  if (o.grid) doc["grid"] = *o.grid;
  if (o.out) doc["output"] = fs::absolute(*o.out).lexically_normal().string();
}

DecomposeConfig parse_decompose(const ConfigDocument& config) {
  Problems problems;
  Fields f(config.doc, problems);
  DecomposeConfig c;
  c.data = input_path(config, f, "data");
  c.periods = read_periods(f);
  c.schema = read_schema(f);
  c.output = output_dir(config, f);

  DecompositionOptions& d = c.analysis.decomposition;
  d.grid = read_grid(f);
  d.fit.link = read_link(f);
  d.fit.control.max_iter = f.get<int>("max_iter").value_or(d.fit.control.max_iter);
  f.read("structure_first", d.structure_first);
  f.read("log_pooling", d.evaluation.log_pooling);
  f.read("leaf_budget", d.evaluation.leaf_budget);
  f.read("max_categories", d.blocks.max_categories);
  f.read("fail_on_nonconvergence", c.analysis.fail_on_nonconvergence);
  if (auto seq = f.get<std::vector<std::string>>("sequence")) {
    d.sequence = *seq;
    std::vector<std::string> names = c.schema.block_names();
    std::vector<std::string> given = *seq;
    std::sort(names.begin(), names.end());
    std::sort(given.begin(), given.end());
    if (!c.schema.blocks().empty() && names != given)
      problems.add("sequence: must list every schema block exactly once");
  }
  f.parse("quantile_mode", [&](const std::string& m) {
    if (m == "linear") c.analysis.quantile_mode = QuantileMode::linear;
    else if (m == "step") c.analysis.quantile_mode = QuantileMode::step;
    else throw ValidationError("expected linear or step");
  });
  if (auto range = f.get<std::vector<double>>("de_range")) {
    if (range->size() != 2 || !((*range)[0] > 0.0 && (*range)[0] < (*range)[1] && (*range)[1] < 1.0))
      problems.add("de_range: need [lo, hi] with 0 < lo < hi < 1");
    else {
      c.de_lo = (*range)[0];
      c.de_hi = (*range)[1];
    }
  }
  f.read("de_points", c.de_count);
  if (c.de_count < 2) problems.add("de_points: need at least 2");

  c.bootstrap.seed = f.get<std::uint64_t>("seed").value_or(c.bootstrap.seed);
  if (f.has("bootstrap")) {
    Fields b(f.sub("bootstrap"), problems, "bootstrap");
    b.read("replications", c.replications);
    b.parse("scheme", [&](const std::string& s) { c.bootstrap.scheme = parse_bootstrap_scheme(s); });
    b.parse("se", [&](const std::string& s) { c.se = parse_se_method(s); });
    b.read("coverage", c.bootstrap.coverage);
    b.read("threads", c.bootstrap.threads);
    b.read("max_failure_rate", c.bootstrap.max_failure_rate);
  }
  // Zero replications skips the bootstrap.
  if (c.replications > 0) {
    c.bootstrap.replications = c.replications;
    try {
      validate(c.bootstrap);
    } catch (const ValidationError& e) {
      problems.add(std::string("bootstrap: ") + e.what());
    }
  }
  problems.check("decompose config");
  return c;
}

MellyConfig parse_melly(const ConfigDocument& config) {
  Problems problems;
  Fields f(config.doc, problems);
  MellyConfig c;
  c.data = input_path(config, f, "data");
  c.periods = read_periods(f);
  c.schema = read_schema(f);
  c.output = output_dir(config, f);
  c.taus = read_taus(f);
  if (f.has("qr")) {
    Fields q(f.sub("qr"), problems, "qr");
    q.read("tol", c.qr.tol);
    q.read("max_iter", c.qr.max_iter);
  }
  problems.check("melly config");
  return c;
}

PrepConfig parse_prep(const ConfigDocument& config) {
  Problems problems;
  Fields f(config.doc, problems);
  PrepConfig c;
  c.households = input_path(config, f, "households");
  c.schema = read_schema(f);
  c.output = output_dir(config, f);
  f.parse("equivalence_scale", [&](const std::string& s) { c.scale = parse_equivalence_scale(s); });
  f.read("log_outcome", c.log_outcome);

  if (!f.has("deflator")) {
    problems.add("deflator: required field is missing");
  } else {
    Fields d(f.sub("deflator"), problems, "deflator");
    c.deflator.name = d.get<std::string>("name").value_or("price index");
    if (auto values = d.get<std::map<std::string, double>>("values", true))
      c.deflator.values.insert(values->begin(), values->end());
    try {
      c.deflator.validate();
    } catch (const ValidationError& e) {
      problems.add(std::string("deflator: ") + e.what());
    }
  }

  if (f.has("imputation")) {
    Fields i(f.sub("imputation"), problems, "imputation");
    c.imputation.flow_rate = i.get<double>("flow_rate");
    c.imputation.annual_depreciation = i.get<double>("annual_depreciation");
    i.parse("retransform", [&](const std::string& s) { c.imputation.retransform = parse_retransform(s); });
  }
  if (f.has("vehicles")) {
    Fields v(f.sub("vehicles"), problems, "vehicles");
    VehicleInput in;
    in.path = input_path(config, v, "path");
    in.characteristics = v.get<std::vector<std::string>>("characteristics").value_or(in.characteristics);
    c.vehicles = in;
    try {
      c.imputation.validate_vehicle();
    } catch (const ValidationError& e) {
      problems.add(std::string("imputation: ") + e.what());
    }
  }
  if (f.has("housing")) {
    Fields h(f.sub("housing"), problems, "housing");
    HousingInput in;
    in.path = input_path(config, h, "path");
    in.characteristics = h.get<std::vector<std::string>>("characteristics").value_or(in.characteristics);
    c.housing = in;
  }
  if (f.has("iv")) {
    Fields v(f.sub("iv"), problems, "iv");
    IvInput in;
    in.path = input_path(config, v, "path");
    v.read("y", in.y);
    v.read("x", in.x);
    v.read("z", in.z);
    v.read("w", in.w);
    in.period = v.get<std::string>("period");
    v.read("trim", in.trim);
    if (!(in.trim >= 0.0 && in.trim < 0.25)) problems.add("iv.trim: must lie in [0, 0.25)");
    c.iv = in;
  }
  if (f.has("basket")) {
    if (!f.sub("basket").is_array()) problems.add("basket: expected a list");
    else
      for (const auto& b : f.sub("basket")) {
        Fields bf(b, problems, "basket");
        BasketInput in;
        in.label = bf.get<std::string>("label", true).value_or("");
        in.components = bf.get<std::vector<double>>("components", true).value_or(in.components);
        in.weights = bf.get<std::vector<double>>("weights").value_or(
            std::vector<double>(in.components.size(), in.components.empty() ? 0.0 : 1.0 / in.components.size()));
        in.all_items = bf.get<double>("all_items", true).value_or(0.0);
        if (in.components.size() != in.weights.size())
          problems.add("basket." + in.label + ": components and weights differ in length");
        c.baskets.push_back(std::move(in));
      }
  }
  problems.check("prep config");
  return c;
}

SimulateConfig parse_simulate(const ConfigDocument& config) {
  Problems problems;
  Fields f(config.doc, problems);
  SimulateConfig c;
  c.output = output_dir(config, f);
  if (!f.has("dgp")) problems.add("dgp: required field is missing");
  else c.dgp = f.sub("dgp");
  if (auto p = read_periods(f)) c.periods = *p;
  c.link = read_link(f);
  c.grid = read_grid(f);
  c.taus = read_taus(f);
  f.read("saturated", c.saturated);
  f.read("exact_tolerance", c.exact_tolerance);
  f.read("population_tolerance", c.population_tolerance);
  f.read("residual_tolerance", c.residual_tolerance);
  f.read("variance_tolerance", c.variance_tolerance);
  if (f.has("fixture")) c.fixture = input_path(config, f, "fixture");
  if (auto seed = f.get<std::uint64_t>("seed"); seed && c.dgp.is_object()) c.dgp["seed"] = *seed;
  problems.check("simulate config");
  return c;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

}  // namespace cfdecomp::cli
