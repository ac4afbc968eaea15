#include <hotuner/harness.hpp>

#include "detail_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace hotuner::harness {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- json plumbing ------------------------------------------------------------

namespace {

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json* find(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const char* key, const std::string& parent) {
  if (!j.is_object()) fail(parent.empty() ? "config" : parent, "expected an object");
  const json* v = find(j, key);
  if (!v) fail(join(parent, key), "missing required field");
  return *v;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "config" : path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail(path.empty() ? item.key() : join(path, item.key()),
                     "unknown field");
  }
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

long as_long(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

ParameterVector as_param_vector(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  ParameterVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        as_double(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

std::vector<double> as_double_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json vec_to_json(const ParameterVector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

// ---- source (de)serialization --------------------------------------------------

regress::Sinusoid sinusoid_from_json(const json& j, const std::string& path) {
  check_keys(j, {"offset", "amplitude", "omega", "phase"}, path);
  regress::Sinusoid s;
  if (const json* v = find(j, "offset")) s.offset = as_double(*v, join(path, "offset"));
  if (const json* v = find(j, "amplitude"))
    s.amplitude = as_double(*v, join(path, "amplitude"));
  if (const json* v = find(j, "omega")) s.omega = as_double(*v, join(path, "omega"));
  if (const json* v = find(j, "phase")) s.phase = as_double(*v, join(path, "phase"));
  return s;
}

json sinusoid_to_json(const regress::Sinusoid& s) {
  return json{{"offset", s.offset},
              {"amplitude", s.amplitude},
              {"omega", s.omega},
              {"phase", s.phase}};
}

regress::LagRef lag_ref_from_json(const json& j, const std::string& path) {
  check_keys(j, {"signal", "lag", "exponent"}, path);
  regress::LagRef ref;
  const std::string sig = as_string(require(j, "signal", path), join(path, "signal"));
  if (sig == "output") {
    ref.signal = regress::LagRef::Signal::kOutput;
  } else if (sig == "input") {
    ref.signal = regress::LagRef::Signal::kInput;
  } else {
    fail(join(path, "signal"), "expected 'output' or 'input', got '" + sig + "'");
  }
  ref.lag = as_long(require(j, "lag", path), join(path, "lag"));
  if (const json* v = find(j, "exponent")) {
    ref.exponent = as_long(*v, join(path, "exponent"));
  }
  return ref;
}

regress::BasisFn basis_fn_from_json(const json& j, const std::string& path) {
  check_keys(j, {"kind", "lag_refs", "scale"}, path);
  regress::BasisFn fn;
  const std::string kind = as_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "monomial-product") {
    fn.kind = regress::BasisFn::Kind::kMonomialProduct;
  } else if (kind == "sine-of-lag") {
    fn.kind = regress::BasisFn::Kind::kSineOfLag;
  } else if (kind == "saturation-of-lag") {
    fn.kind = regress::BasisFn::Kind::kSaturationOfLag;
  } else {
    fail(join(path, "kind"), "unknown basis function kind '" + kind + "'");
  }
  if (const json* v = find(j, "lag_refs")) {
    if (!v->is_array()) fail(join(path, "lag_refs"), "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      fn.lag_refs.push_back(lag_ref_from_json(
          (*v)[i], join(path, "lag_refs[" + std::to_string(i) + "]")));
    }
  }
  if (const json* v = find(j, "scale")) fn.scale = as_double(*v, join(path, "scale"));
  return fn;
}

json basis_fn_to_json(const regress::BasisFn& fn) {
  json j;
  switch (fn.kind) {
    case regress::BasisFn::Kind::kMonomialProduct:
      j["kind"] = "monomial-product";
      break;
    case regress::BasisFn::Kind::kSineOfLag:
      j["kind"] = "sine-of-lag";
      break;
    case regress::BasisFn::Kind::kSaturationOfLag:
      j["kind"] = "saturation-of-lag";
      break;
  }
  json refs = json::array();
  for (const regress::LagRef& ref : fn.lag_refs) {
    refs.push_back(
        json{{"signal",
              ref.signal == regress::LagRef::Signal::kOutput ? "output" : "input"},
             {"lag", ref.lag},
             {"exponent", ref.exponent}});
  }
  j["lag_refs"] = refs;
  j["scale"] = fn.scale;
  return j;
}

regress::PlantSpec plant_from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"a_coeffs", "b_coeffs", "c_coeffs", "delay_d", "basis",
              "initial_outputs"},
             path);
  regress::PlantSpec spec;
  if (const json* v = find(j, "a_coeffs"))
    spec.a_coeffs = as_double_list(*v, join(path, "a_coeffs"));
  if (const json* v = find(j, "b_coeffs"))
    spec.b_coeffs = as_double_list(*v, join(path, "b_coeffs"));
  if (const json* v = find(j, "c_coeffs"))
    spec.c_coeffs = as_double_list(*v, join(path, "c_coeffs"));
  if (const json* v = find(j, "delay_d"))
    spec.delay_d = as_long(*v, join(path, "delay_d"));
  if (const json* v = find(j, "basis")) {
    if (!v->is_array()) fail(join(path, "basis"), "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      spec.basis.push_back(basis_fn_from_json(
          (*v)[i], join(path, "basis[" + std::to_string(i) + "]")));
    }
  }
  if (const json* v = find(j, "initial_outputs"))
    spec.initial_outputs = as_double_list(*v, join(path, "initial_outputs"));
  return spec;
}

json plant_to_json(const regress::PlantSpec& spec) {
  json j;
  j["a_coeffs"] = spec.a_coeffs;
  j["b_coeffs"] = spec.b_coeffs;
  j["c_coeffs"] = spec.c_coeffs;
  j["delay_d"] = spec.delay_d;
  json basis = json::array();
  for (const regress::BasisFn& fn : spec.basis) basis.push_back(basis_fn_to_json(fn));
  j["basis"] = basis;
  j["initial_outputs"] = spec.initial_outputs;
  return j;
}

regress::InputSignal input_from_json(const json& j, const std::string& path) {
  regress::InputSignal in;
  const std::string kind = as_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "constant") {
    check_keys(j, {"kind", "value"}, path);
    in.kind = regress::InputSignal::Kind::kConstant;
    in.value = as_double(require(j, "value", path), join(path, "value"));
  } else if (kind == "samples") {
    check_keys(j, {"kind", "values"}, path);
    in.kind = regress::InputSignal::Kind::kSamples;
    in.samples = as_double_list(require(j, "values", path), join(path, "values"));
  } else if (kind == "sinusoid") {
    check_keys(j, {"kind", "offset", "amplitude", "omega", "phase"}, path);
    in.kind = regress::InputSignal::Kind::kSinusoid;
    if (const json* v = find(j, "offset")) in.offset = as_double(*v, join(path, "offset"));
    if (const json* v = find(j, "amplitude"))
      in.amplitude = as_double(*v, join(path, "amplitude"));
    if (const json* v = find(j, "omega")) in.omega = as_double(*v, join(path, "omega"));
    if (const json* v = find(j, "phase")) in.phase = as_double(*v, join(path, "phase"));
  } else {
    fail(join(path, "kind"), "unknown input kind '" + kind +
                                 "' (expected constant, samples, sinusoid)");
  }
  return in;
}

json input_to_json(const regress::InputSignal& in) {
  switch (in.kind) {
    case regress::InputSignal::Kind::kConstant:
      return json{{"kind", "constant"}, {"value", in.value}};
    case regress::InputSignal::Kind::kSamples:
      return json{{"kind", "samples"}, {"values", in.samples}};
    case regress::InputSignal::Kind::kSinusoid:
      return json{{"kind", "sinusoid"},
                  {"offset", in.offset},
                  {"amplitude", in.amplitude},
                  {"omega", in.omega},
                  {"phase", in.phase}};
  }
  return json();
}

regress::RegressorSource source_from_json(const json& j, const std::string& path) {
  regress::RegressorSource src;
  const std::string kind = as_string(require(j, "kind", path), join(path, "kind"));
  if (kind == "constant") {
    check_keys(j, {"kind", "phi"}, path);
    src.kind = regress::RegressorSource::Kind::kConstant;
    src.constant_phi = as_param_vector(require(j, "phi", path), join(path, "phi"));
  } else if (kind == "piecewise-constant") {
    check_keys(j, {"kind", "segments"}, path);
    src.kind = regress::RegressorSource::Kind::kPiecewiseConstant;
    const json& segs = require(j, "segments", path);
    if (!segs.is_array()) fail(join(path, "segments"), "expected an array");
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::string spath = join(path, "segments[" + std::to_string(i) + "]");
      check_keys(segs[i], {"start_k", "phi"}, spath);
      regress::PiecewiseSegment seg;
      seg.start_k = as_long(require(segs[i], "start_k", spath), join(spath, "start_k"));
      seg.phi = as_param_vector(require(segs[i], "phi", spath), join(spath, "phi"));
      src.segments.push_back(std::move(seg));
    }
  } else if (kind == "sinusoid-bank") {
    check_keys(j, {"kind", "components"}, path);
    src.kind = regress::RegressorSource::Kind::kSinusoidBank;
    const json& comps = require(j, "components", path);
    if (!comps.is_array()) fail(join(path, "components"), "expected an array");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      src.components.push_back(sinusoid_from_json(
          comps[i], join(path, "components[" + std::to_string(i) + "]")));
    }
  } else if (kind == "plant") {
    check_keys(j, {"kind", "plant", "input"}, path);
    src.kind = regress::RegressorSource::Kind::kPlant;
    src.plant = plant_from_json(require(j, "plant", path), join(path, "plant"));
    if (const json* v = find(j, "input")) {
      src.input = input_from_json(*v, join(path, "input"));
    }
  } else if (kind == "file") {
    check_keys(j, {"kind", "path"}, path);
    src.kind = regress::RegressorSource::Kind::kFile;
    src.file_path = as_string(require(j, "path", path), join(path, "path"));
  } else {
    fail(join(path, "kind"),
         "unknown source kind '" + kind +
             "' (expected constant, piecewise-constant, sinusoid-bank, plant, file)");
  }
  return src;
}

json source_to_json(const regress::RegressorSource& src) {
  json j;
  switch (src.kind) {
    case regress::RegressorSource::Kind::kConstant:
      j["kind"] = "constant";
      j["phi"] = vec_to_json(src.constant_phi);
      break;
    case regress::RegressorSource::Kind::kPiecewiseConstant: {
      j["kind"] = "piecewise-constant";
      json segs = json::array();
      for (const regress::PiecewiseSegment& seg : src.segments) {
        segs.push_back(json{{"start_k", seg.start_k}, {"phi", vec_to_json(seg.phi)}});
      }
      j["segments"] = segs;
      break;
    }
    case regress::RegressorSource::Kind::kSinusoidBank: {
      j["kind"] = "sinusoid-bank";
      json comps = json::array();
      for (const regress::Sinusoid& s : src.components) {
        comps.push_back(sinusoid_to_json(s));
      }
      j["components"] = comps;
      break;
    }
    case regress::RegressorSource::Kind::kPlant:
      j["kind"] = "plant";
      j["plant"] = plant_to_json(src.plant);
      j["input"] = input_to_json(src.input);
      break;
    case regress::RegressorSource::Kind::kFile:
      j["kind"] = "file";
      j["path"] = src.file_path;
      break;
  }
  return j;
}

AlgorithmConfig algorithm_config_from_json(const json& j, const std::string& path) {
  check_keys(j, {"algorithm", "alpha", "beta", "gamma", "label", "allow_violations"},
             path);
  AlgorithmConfig ac;
  const std::string name =
      as_string(require(j, "algorithm", path), join(path, "algorithm"));
  try {
    ac.hp.algorithm = tuners::algorithm_from_string(name);
  } catch (const ConfigError& e) {
    fail(join(path, "algorithm"), e.what());
  }
  // Each update law reads a fixed subset of the step sizes; a key the law
  // ignores is a config mistake, not a default worth guessing at.
  if (ac.hp.algorithm == tuners::Algorithm::kNGD) {
    if (find(j, "beta") || find(j, "gamma")) {
      fail(path, "'" + name + "' takes alpha only, not beta/gamma");
    }
    if (!find(j, "alpha")) fail(join(path, "alpha"), "required for '" + name + "'");
  } else {
    if (find(j, "alpha")) {
      fail(path, "'" + name + "' takes beta and gamma, not alpha");
    }
    if (!find(j, "beta")) fail(join(path, "beta"), "required for '" + name + "'");
    if (!find(j, "gamma")) fail(join(path, "gamma"), "required for '" + name + "'");
  }
  if (const json* v = find(j, "alpha")) ac.hp.alpha = as_double(*v, join(path, "alpha"));
  if (const json* v = find(j, "beta")) ac.hp.beta = as_double(*v, join(path, "beta"));
  if (const json* v = find(j, "gamma")) ac.hp.gamma = as_double(*v, join(path, "gamma"));
  ac.label = to_string(ac.hp.algorithm);
  if (const json* v = find(j, "label")) ac.label = as_string(*v, join(path, "label"));
  if (const json* v = find(j, "allow_violations")) {
    ac.allow_violations = as_bool(*v, join(path, "allow_violations"));
  }
  return ac;
}

json algorithm_config_to_json(const AlgorithmConfig& ac) {
  json j;
  j["algorithm"] = to_string(ac.hp.algorithm);
  if (ac.hp.algorithm == tuners::Algorithm::kNGD) {
    j["alpha"] = ac.hp.alpha;
  } else {
    j["beta"] = ac.hp.beta;
    j["gamma"] = ac.hp.gamma;
  }
  j["label"] = ac.label;
  j["allow_violations"] = ac.allow_violations;
  return j;
}

}  // namespace

// ---- config ---------------------------------------------------------------------

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"name", "algorithms", "source", "theta_star", "horizon", "init_theta",
              "validation_mode", "analysis", "output", "notes"},
             "");
  ExperimentConfig c;
  if (const json* v = find(j, "name")) c.name = as_string(*v, "name");

  const json& algs = require(j, "algorithms", "");
  if (!algs.is_array()) fail("algorithms", "expected an array");
  for (std::size_t i = 0; i < algs.size(); ++i) {
    c.algorithms.push_back(algorithm_config_from_json(
        algs[i], "algorithms[" + std::to_string(i) + "]"));
  }

  c.source = source_from_json(require(j, "source", ""), "source");
  if (const json* v = find(j, "theta_star")) {
    c.theta_star = as_param_vector(*v, "theta_star");
  }
  c.horizon = as_long(require(j, "horizon", ""), "horizon");
  if (const json* v = find(j, "init_theta")) {
    c.init_theta = as_param_vector(*v, "init_theta");
  }
  if (const json* v = find(j, "validation_mode")) {
    const std::string mode = as_string(*v, "validation_mode");
    if (mode == "theorem") {
      c.validation_mode = tuners::ValidationMode::kTheorem;
    } else if (mode == "strict") {
      c.validation_mode = tuners::ValidationMode::kStrict;
    } else {
      fail("validation_mode", "expected 'theorem' or 'strict', got '" + mode + "'");
    }
  }
  if (const json* v = find(j, "analysis")) {
    check_keys(*v, {"enabled", "delta_t", "tolerance"}, "analysis");
    if (const json* f = find(*v, "enabled"))
      c.analysis.enabled = as_bool(*f, "analysis.enabled");
    if (const json* f = find(*v, "delta_t"))
      c.analysis.delta_t = as_long(*f, "analysis.delta_t");
    if (const json* f = find(*v, "tolerance"))
      c.analysis.tolerance = as_double(*f, "analysis.tolerance");
  }
  if (const json* v = find(j, "output")) {
    check_keys(*v, {"directory", "formats"}, "output");
    if (const json* f = find(*v, "directory"))
      c.output.directory = as_string(*f, "output.directory");
    if (const json* f = find(*v, "formats")) {
      if (!f->is_array()) fail("output.formats", "expected an array");
      c.output.csv = false;
      c.output.json = false;
      for (std::size_t i = 0; i < f->size(); ++i) {
        const std::string fmt =
            as_string((*f)[i], "output.formats[" + std::to_string(i) + "]");
        if (fmt == "csv") {
          c.output.csv = true;
        } else if (fmt == "json") {
          c.output.json = true;
        } else {
          fail("output.formats[" + std::to_string(i) + "]",
               "expected 'csv' or 'json', got '" + fmt + "'");
        }
      }
    }
  }
  if (const json* v = find(j, "notes")) c.notes = as_string(*v, "notes");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json algs = json::array();
  for (const AlgorithmConfig& ac : c.algorithms) {
    algs.push_back(algorithm_config_to_json(ac));
  }
  j["algorithms"] = algs;
  j["source"] = source_to_json(c.source);
  if (c.theta_star.size() > 0) j["theta_star"] = vec_to_json(c.theta_star);
  j["horizon"] = c.horizon;
  if (c.init_theta.size() > 0) j["init_theta"] = vec_to_json(c.init_theta);
  j["validation_mode"] =
      c.validation_mode == tuners::ValidationMode::kTheorem ? "theorem" : "strict";
  j["analysis"] = json{{"enabled", c.analysis.enabled},
                       {"delta_t", c.analysis.delta_t},
                       {"tolerance", c.analysis.tolerance}};
  json formats = json::array();
  if (c.output.csv) formats.push_back("csv");
  if (c.output.json) formats.push_back("json");
  j["output"] = json{{"directory", c.output.directory}, {"formats", formats}};
  if (!c.notes.empty()) j["notes"] = c.notes;
  return j;
}

ParameterVector effective_theta_star(const ExperimentConfig& config) {
  if (config.source.kind == regress::RegressorSource::Kind::kPlant) {
    return config.source.plant.theta_star();
  }
  return config.theta_star;
}

void ExperimentConfig::validate() const {
  if (name.empty()) fail("name", "must be non-empty");
  if (horizon < 1) {
    fail("horizon", "must be >= 1, got " + std::to_string(horizon));
  }
  if (algorithms.empty()) fail("algorithms", "at least one entry is required");

  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    const AlgorithmConfig& ac = algorithms[i];
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    if (ac.label.empty()) fail(join(path, "label"), "must be non-empty");
    for (char ch : ac.label) {
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
            ch == '.')) {
        fail(join(path, "label"),
             "label '" + ac.label + "' may only contain [A-Za-z0-9_.-]");
      }
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (algorithms[k].label == ac.label) {
        fail(join(path, "label"), "duplicate label '" + ac.label + "'");
      }
    }

    const bool has_v = ac.hp.algorithm == tuners::Algorithm::kHB ||
                       ac.hp.algorithm == tuners::Algorithm::kNA;
    if (has_v && !(ac.hp.gamma > 0.0)) {
      fail(join(path, "gamma"),
           "must be > 0 for hb/na regardless of allow_violations (the Lyapunov "
           "trace scales by 1/gamma)");
    }
    const auto violations = tuners::validate_hyperparams(ac.hp, validation_mode);
    if (!violations.empty() && !ac.allow_violations) {
      std::string msg = "hyperparameters violate ";
      for (std::size_t v = 0; v < violations.size(); ++v) {
        if (v > 0) msg += "; ";
        msg += "'" + violations[v].constraint +
               "' (bound=" + detail::fmt17(violations[v].bound) +
               ", actual=" + detail::fmt17(violations[v].actual) + ")";
      }
      fail(path + " (" + ac.label + ")", msg + " — set allow_violations to run anyway");
    }
  }

  try {
    source.validate();
  } catch (const InvalidSpecError& e) {
    fail("source", e.what());
  }

  if (source.kind == regress::RegressorSource::Kind::kPlant) {
    if (theta_star.size() > 0) {
      fail("theta_star",
           "must be omitted for plant sources (derived from the plant coefficients)");
    }
  } else {
    if (theta_star.size() == 0) {
      fail("theta_star", "required for non-plant sources");
    }
    const long d = source.dimension();
    if (d >= 0 && d != theta_star.size()) {
      fail("theta_star", "dimension " + std::to_string(theta_star.size()) +
                             " does not match source dimension " + std::to_string(d));
    }
  }

  if (init_theta.size() > 0) {
    const long d = source.kind == regress::RegressorSource::Kind::kPlant
                       ? source.plant.dimension()
                       : theta_star.size();
    if (init_theta.size() != d) {
      fail("init_theta", "dimension " + std::to_string(init_theta.size()) +
                             " does not match parameter dimension " +
                             std::to_string(d));
    }
  }

  if (analysis.enabled) {
    if (analysis.delta_t < 1) {
      fail("analysis.delta_t", "must be >= 1 when analysis is enabled");
    }
    if (analysis.delta_t > horizon) {
      fail("analysis.delta_t", "must not exceed the horizon (" +
                                   std::to_string(analysis.delta_t) + " > " +
                                   std::to_string(horizon) + ")");
    }
    if (analysis.tolerance < 0.0) fail("analysis.tolerance", "must be >= 0");
  }
  if (!output.csv && !output.json) {
    fail("output.formats", "must include 'csv' and/or 'json'");
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open for reading");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  if (c.name.empty()) c.name = path.stem().string();
  if (c.source.kind == regress::RegressorSource::Kind::kFile) {
    fs::path fp = c.source.file_path;
    if (fp.is_relative()) {
      c.source.file_path = (path.parent_path() / fp).string();
    }
  }
  c.validate();
  return c;
}

// ---- trace CSV --------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  if (trace.empty()) throw InvalidArgumentError("write_trace_csv: empty trace");
  const Eigen::Index d = trace.front().theta.size();
  out << "k,algorithm,e_y,param_err,v";
  for (Eigen::Index i = 1; i <= d; ++i) out << ",theta_" << i;
  for (Eigen::Index i = 1; i <= d; ++i) out << ",vartheta_" << i;
  out << '\n';
  for (const TraceRecord& rec : trace) {
    if (rec.theta.size() != d ||
        (rec.vartheta.size() != 0 && rec.vartheta.size() != d)) {
      throw InvalidArgumentError("write_trace_csv: rows disagree on dimension");
    }
    out << rec.k << ',' << rec.algorithm << ',' << detail::fmt17(rec.e_y) << ','
        << detail::fmt17(rec.param_err) << ',';
    if (rec.v) out << detail::fmt17(*rec.v);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << detail::fmt17(rec.theta[i]);
    if (rec.vartheta.size() == d) {
      for (Eigen::Index i = 0; i < d; ++i) {
        out << ',' << detail::fmt17(rec.vartheta[i]);
      }
    } else {
      for (Eigen::Index i = 0; i < d; ++i) out << ',';
    }
    out << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in,
                                        const std::string& name_for_errors) {
  auto fail_at = [&](long line_no, const std::string& what) -> ParseError {
    return ParseError(name_for_errors + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) throw fail_at(1, "missing header");
  detail::strip_cr(line);
  const std::vector<std::string_view> header = detail::split_csv(line);
  static constexpr const char* kFixed[] = {"k", "algorithm", "e_y", "param_err", "v"};
  if (header.size() < 7) throw fail_at(1, "header has too few columns");
  for (int i = 0; i < 5; ++i) {
    if (header[i] != kFixed[i]) {
      throw fail_at(1, std::string("expected column '") + kFixed[i] + "', got '" +
                           std::string(header[i]) + "'");
    }
  }
  const std::size_t rest = header.size() - 5;
  if (rest % 2 != 0) throw fail_at(1, "theta/vartheta column groups differ in size");
  const long d = static_cast<long>(rest / 2);
  for (long i = 0; i < d; ++i) {
    const std::string want_t = "theta_" + std::to_string(i + 1);
    const std::string want_v = "vartheta_" + std::to_string(i + 1);
    if (header[5 + i] != want_t) {
      throw fail_at(1, "expected column '" + want_t + "', got '" +
                           std::string(header[5 + i]) + "'");
    }
    if (header[5 + d + i] != want_v) {
      throw fail_at(1, "expected column '" + want_v + "', got '" +
                           std::string(header[5 + d + i]) + "'");
    }
  }

  std::vector<TraceRecord> trace;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string_view> f = detail::split_csv(line);
    if (f.size() != header.size()) {
      throw fail_at(line_no, "expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(f.size()));
    }
    TraceRecord rec;
    if (!detail::parse_long(f[0], rec.k)) {
      throw fail_at(line_no, "bad iteration index '" + std::string(f[0]) + "'");
    }
    rec.algorithm = std::string(f[1]);
    if (rec.algorithm.empty()) throw fail_at(line_no, "empty algorithm label");
    if (!detail::parse_double(f[2], rec.e_y)) {
      throw fail_at(line_no, "bad e_y value '" + std::string(f[2]) + "'");
    }
    if (!detail::parse_double(f[3], rec.param_err)) {
      throw fail_at(line_no, "bad param_err value '" + std::string(f[3]) + "'");
    }
    if (!f[4].empty()) {
      double v = 0.0;
      if (!detail::parse_double(f[4], v)) {
        throw fail_at(line_no, "bad v value '" + std::string(f[4]) + "'");
      }
      rec.v = v;
    }
    rec.theta.resize(d);
    for (long i = 0; i < d; ++i) {
      if (!detail::parse_double(f[5 + i], rec.theta[i])) {
        throw fail_at(line_no, "bad value '" + std::string(f[5 + i]) +
                                   "' in column theta_" + std::to_string(i + 1));
      }
    }
    long empties = 0;
    for (long i = 0; i < d; ++i) {
      if (f[5 + d + i].empty()) ++empties;
    }
    if (empties == 0) {
      rec.vartheta.resize(d);
      for (long i = 0; i < d; ++i) {
        if (!detail::parse_double(f[5 + d + i], rec.vartheta[i])) {
          throw fail_at(line_no, "bad value '" + std::string(f[5 + d + i]) +
                                     "' in column vartheta_" + std::to_string(i + 1));
        }
      }
    } else if (empties != d) {
      throw fail_at(line_no, "vartheta columns must be all present or all empty");
    }
    trace.push_back(std::move(rec));
  }
  return trace;
}

std::vector<TraceRecord> load_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open for reading");
  return read_trace_csv(in, path.string());
}

// ---- experiment runner --------------------------------------------------------------

RunArtifact run_experiment(const ExperimentConfig& config) {
  config.validate();

  RunArtifact art;
  art.config = config;
  art.theta_star = effective_theta_star(config);

  const std::vector<regress::RegressorSample> samples =
      regress::regressor_stream(config.source, art.theta_star, config.horizon);
  const Eigen::Index dim = art.theta_star.size();

  ParameterVector theta0 = config.init_theta.size() > 0
                               ? config.init_theta
                               : ParameterVector(ParameterVector::Zero(dim));
  if (theta0.size() != dim) {
    throw ConfigError("init_theta: dimension " + std::to_string(theta0.size()) +
                      " does not match parameter dimension " + std::to_string(dim));
  }

  if (config.analysis.enabled) {
    art.pe = analysis::pe_epsilon(samples, config.analysis.delta_t);
  }

  for (const AlgorithmConfig& ac : config.algorithms) {
    AlgorithmRunResult res;
    res.algo = ac;
    res.violations = tuners::validate_hyperparams(ac.hp, config.validation_mode);
    const bool has_v = ac.hp.algorithm == tuners::Algorithm::kHB ||
                       ac.hp.algorithm == tuners::Algorithm::kNA;

    tuners::TunerState state = tuners::make_state(theta0);
    res.trace.reserve(samples.size());
    for (const regress::RegressorSample& sample : samples) {
      TraceRecord rec;
      rec.k = sample.k;
      rec.algorithm = ac.label;
      rec.param_err = analysis::parameter_error(state.theta, art.theta_star);
      rec.theta = state.theta;
      if (has_v) {
        rec.v = analysis::lyapunov(state.theta, state.vartheta, art.theta_star,
                                   ac.hp.gamma);
        rec.vartheta = state.vartheta;
      }
      try {
        auto [next, diag] = tuners::step(state, sample, ac.hp);
        rec.e_y = diag.e_y;
        state = std::move(next);
      } catch (const DivergenceError& e) {
        throw DivergenceError(ac.label, e.step());
      }
      res.trace.push_back(std::move(rec));
    }
    res.final_state = std::move(state);

    if (config.analysis.enabled && has_v) {
      // The descent reports an upper bound on the true excitation level, so a
      // rank-deficient regressor can surface as a sub-roundoff positive value
      // rather than an exact zero. Below this floor we refuse to certify.
      if (art.pe->epsilon_norm > 1e-12) {
        try {
          res.rate = ac.hp.algorithm == tuners::Algorithm::kHB
                         ? analysis::rate_bound_hb(*art.pe, ac.hp.beta, ac.hp.gamma)
                         : analysis::rate_bound_na(*art.pe, ac.hp.beta, ac.hp.gamma,
                                                   config.analysis.delta_t);
          std::vector<double> v_trace;
          v_trace.reserve(res.trace.size());
          for (const TraceRecord& rec : res.trace) v_trace.push_back(*rec.v);
          res.envelope = analysis::check_envelope(
              v_trace, res.rate->mu, config.analysis.delta_t, config.analysis.tolerance);
        } catch (const NotPersistentlyExcitingError& e) {
          res.note = std::string("decay certificate unavailable: ") + e.what();
        } catch (const InvalidArgumentError& e) {
          res.note = std::string("decay certificate unavailable: ") + e.what();
        }
      } else {
        res.note = "regressor is not persistently exciting over delta_t=" +
                   std::to_string(config.analysis.delta_t) +
                   "; decay certificate unavailable";
      }
    }
    art.results.push_back(std::move(res));
  }
  return art;
}

// ---- reports ---------------------------------------------------------------------

json pe_report_to_json(const analysis::PEReport& pe) {
  return json{{"delta_t", pe.delta_t},
              {"epsilon", pe.epsilon},
              {"epsilon_lb", pe.epsilon_lb},
              {"max_sqrt_nk", pe.max_sqrt_nk},
              {"epsilon_norm", pe.epsilon_norm}};
}

json rate_report_to_json(const analysis::RateReport& rate) {
  json j;
  j["algorithm"] = tuners::to_string(rate.algorithm);
  j["delta_t"] = rate.delta_t;
  j["lambda"] = rate.lambda;
  j["eta"] = rate.eta;
  if (rate.algorithm == tuners::Algorithm::kNA) {
    j["zeta"] = rate.zeta;
    j["xi"] = rate.xi;
  }
  j["mu_terms"] = rate.mu_terms;
  j["mu"] = rate.mu;
  j["c_consts"] = rate.c_consts;
  return j;
}

json envelope_report_to_json(const analysis::EnvelopeReport& env) {
  json j;
  j["holds"] = env.holds;
  j["first_violation_k"] =
      env.first_violation_k ? json(*env.first_violation_k) : json(nullptr);
  j["max_ratio"] = env.max_ratio;
  return j;
}

namespace {

analysis::PEReport pe_report_from_json(const json& j, const std::string& path) {
  analysis::PEReport pe;
  pe.delta_t = as_long(require(j, "delta_t", path), join(path, "delta_t"));
  pe.epsilon = as_double(require(j, "epsilon", path), join(path, "epsilon"));
  pe.epsilon_lb = as_double(require(j, "epsilon_lb", path), join(path, "epsilon_lb"));
  pe.max_sqrt_nk =
      as_double(require(j, "max_sqrt_nk", path), join(path, "max_sqrt_nk"));
  pe.epsilon_norm =
      as_double(require(j, "epsilon_norm", path), join(path, "epsilon_norm"));
  return pe;
}

analysis::RateReport rate_report_from_json(const json& j, const std::string& path) {
  analysis::RateReport rate;
  try {
    rate.algorithm = tuners::algorithm_from_string(
        as_string(require(j, "algorithm", path), join(path, "algorithm")));
  } catch (const ConfigError& e) {
    fail(join(path, "algorithm"), e.what());
  }
  rate.delta_t = as_long(require(j, "delta_t", path), join(path, "delta_t"));
  rate.lambda = as_double(require(j, "lambda", path), join(path, "lambda"));
  rate.eta = as_double(require(j, "eta", path), join(path, "eta"));
  if (const json* v = find(j, "zeta")) rate.zeta = as_double(*v, join(path, "zeta"));
  if (const json* v = find(j, "xi")) rate.xi = as_double(*v, join(path, "xi"));
  rate.mu_terms = as_double_list(require(j, "mu_terms", path), join(path, "mu_terms"));
  rate.mu = as_double(require(j, "mu", path), join(path, "mu"));
  rate.c_consts = as_double_list(require(j, "c_consts", path), join(path, "c_consts"));
  return rate;
}

analysis::EnvelopeReport envelope_report_from_json(const json& j,
                                                   const std::string& path) {
  analysis::EnvelopeReport env;
  env.holds = as_bool(require(j, "holds", path), join(path, "holds"));
  const json& fv = require(j, "first_violation_k", path);
  if (!fv.is_null()) {
    env.first_violation_k = as_long(fv, join(path, "first_violation_k"));
  }
  env.max_ratio = as_double(require(j, "max_ratio", path), join(path, "max_ratio"));
  return env;
}

}  // namespace

json report_to_json(const RunArtifact& art) {
  json j;
  j["name"] = art.config.name;
  j["config"] = config_to_json(art.config);
  j["theta_star"] = vec_to_json(art.theta_star);
  j["dimension"] = art.theta_star.size();
  j["horizon"] = art.config.horizon;
  j["pe"] = art.pe ? pe_report_to_json(*art.pe) : json(nullptr);

  json algs = json::array();
  for (const AlgorithmRunResult& res : art.results) {
    json a;
    a["label"] = res.algo.label;
    a["algorithm"] = to_string(res.algo.hp.algorithm);
    a["hyperparams"] = algorithm_config_to_json(res.algo);
    json viols = json::array();
    for (const tuners::HyperParamViolation& v : res.violations) {
      viols.push_back(json{
          {"constraint", v.constraint}, {"bound", v.bound}, {"actual", v.actual}});
    }
    a["violations"] = viols;
    a["trace_file"] =
        art.config.output.csv ? json(res.algo.label + ".csv") : json(nullptr);

    const TraceRecord& last = res.trace.back();
    a["final"] = json{{"k", last.k},
                      {"e_y", last.e_y},
                      {"param_err", last.param_err},
                      {"v", last.v ? json(*last.v) : json(nullptr)}};
    json fstate;
    fstate["theta"] = vec_to_json(res.final_state.theta);
    fstate["vartheta"] = res.trace.back().vartheta.size() > 0
                             ? vec_to_json(res.final_state.vartheta)
                             : json(nullptr);
    fstate["param_err"] =
        analysis::parameter_error(res.final_state.theta, art.theta_star);
    a["final_state"] = fstate;

    a["rate"] = res.rate ? rate_report_to_json(*res.rate) : json(nullptr);
    a["envelope"] =
        res.envelope ? envelope_report_to_json(*res.envelope) : json(nullptr);
    a["note"] = res.note;
    algs.push_back(std::move(a));
  }
  j["algorithms"] = algs;
  return j;
}

std::vector<fs::path> write_run(const RunArtifact& art, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw InvalidArgumentError("cannot create output directory '" + dir.string() +
                               "': " + ec.message());
  }
  std::vector<fs::path> written;
  if (art.config.output.csv) {
    for (const AlgorithmRunResult& res : art.results) {
      const fs::path p = dir / (res.algo.label + ".csv");
      std::ofstream out(p);
      if (!out) {
        throw InvalidArgumentError("cannot open '" + p.string() + "' for writing");
      }
      write_trace_csv(out, res.trace);
      written.push_back(p);
    }
  }
  if (art.config.output.json) {
    const fs::path p = dir / "report.json";
    std::ofstream out(p);
    if (!out) {
      throw InvalidArgumentError("cannot open '" + p.string() + "' for writing");
    }
    out << report_to_json(art).dump(2) << '\n';
    written.push_back(p);
  }
  return written;
}

RunArtifact load_run(const fs::path& dir) {
  const fs::path rp = dir / "report.json";
  std::ifstream in(rp);
  if (!in) {
    throw ConfigError(dir.string() +
                      ": report.json not found (not a run directory?)");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(rp.string() + ": " + e.what());
  }
  const std::string pre = rp.string();

  RunArtifact art;
  art.config = config_from_json(require(j, "config", pre));
  art.theta_star =
      as_param_vector(require(j, "theta_star", pre), join(pre, "theta_star"));
  const json& pe = require(j, "pe", pre);
  if (!pe.is_null()) art.pe = pe_report_from_json(pe, join(pre, "pe"));

  const json& algs = require(j, "algorithms", pre);
  if (!algs.is_array()) fail(join(pre, "algorithms"), "expected an array");
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const json& a = algs[i];
    const std::string apath = join(pre, "algorithms[" + std::to_string(i) + "]");
    AlgorithmRunResult res;
    res.algo =
        algorithm_config_from_json(require(a, "hyperparams", apath), apath);
    const json& tf = require(a, "trace_file", apath);
    if (tf.is_null()) {
      throw ConfigError(dir.string() + ": run '" + res.algo.label +
                        "' was written without csv traces; compare/analyze/plot "
                        "need them");
    }
    res.trace = load_trace_csv(dir / as_string(tf, join(apath, "trace_file")));
    if (res.trace.empty()) {
      throw ParseError((dir / as_string(tf, apath)).string() + ": no data rows");
    }

    const json& fstate = require(a, "final_state", apath);
    res.final_state.theta = as_param_vector(require(fstate, "theta", apath),
                                            join(apath, "final_state.theta"));
    const json& fv = require(fstate, "vartheta", apath);
    res.final_state.vartheta =
        fv.is_null() ? res.final_state.theta
                     : as_param_vector(fv, join(apath, "final_state.vartheta"));
    res.final_state.theta_prev = res.final_state.theta;
    res.final_state.theta_bar_last = res.final_state.theta;
    res.final_state.k = res.trace.back().k + 1;

    const json& rate = require(a, "rate", apath);
    if (!rate.is_null()) {
      res.rate = rate_report_from_json(rate, join(apath, "rate"));
    }
    const json& env = require(a, "envelope", apath);
    if (!env.is_null()) {
      res.envelope = envelope_report_from_json(env, join(apath, "envelope"));
    }
    if (const json* note = find(a, "note")) {
      res.note = as_string(*note, join(apath, "note"));
    }
    art.results.push_back(std::move(res));
  }
  return art;
}

// ---- compare ----------------------------------------------------------------------

CompareSummary compare(const std::vector<RunArtifact>& runs, double eps_e,
                       double eps_theta) {
  if (runs.empty()) throw InvalidArgumentError("compare: no runs given");

  const RunArtifact& ref = runs.front();
  for (const RunArtifact& run : runs) {
    if (run.config.horizon != ref.config.horizon) {
      throw IncompatibleRunsError(
          "runs disagree on horizon: " + std::to_string(run.config.horizon) +
          " vs " + std::to_string(ref.config.horizon));
    }
    if (run.theta_star.size() != ref.theta_star.size()) {
      throw IncompatibleRunsError("runs disagree on parameter dimension");
    }
    for (Eigen::Index i = 0; i < ref.theta_star.size(); ++i) {
      if (run.theta_star[i] != ref.theta_star[i]) {
        throw IncompatibleRunsError("runs disagree on theta_star");
      }
    }
  }

  CompareSummary summary;
  summary.eps_e = eps_e;
  summary.eps_theta = eps_theta;
  for (const RunArtifact& run : runs) {
    for (const AlgorithmRunResult& res : run.results) {
      CompareRow row;
      row.run = run.config.name;
      row.algorithm = res.algo.label;
      for (const TraceRecord& rec : res.trace) {
        if (!row.first_k_abs_e && std::abs(rec.e_y) < eps_e) {
          row.first_k_abs_e = rec.k;
        }
        if (!row.first_k_param && rec.param_err < eps_theta) {
          row.first_k_param = rec.k;
        }
        if (row.first_k_abs_e && row.first_k_param) break;
      }
      row.final_abs_e = std::abs(res.trace.back().e_y);
      row.final_param_err = res.trace.back().param_err;
      row.envelope =
          res.envelope ? (res.envelope->holds ? "holds" : "violated") : "n/a";
      summary.rows.push_back(std::move(row));
    }
  }
  return summary;
}

void write_compare_csv(std::ostream& out, const CompareSummary& summary) {
  out << "run,algorithm,first_k_abs_e_below,first_k_param_err_below,final_abs_e,"
         "final_param_err,envelope\n";
  for (const CompareRow& row : summary.rows) {
    out << row.run << ',' << row.algorithm << ',';
    if (row.first_k_abs_e) {
      out << *row.first_k_abs_e;
    } else {
      out << "not reached";
    }
    out << ',';
    if (row.first_k_param) {
      out << *row.first_k_param;
    } else {
      out << "not reached";
    }
    out << ',' << detail::fmt17(row.final_abs_e) << ','
        << detail::fmt17(row.final_param_err) << ',' << row.envelope << '\n';
  }
}

json compare_to_json(const CompareSummary& summary) {
  json j;
  j["eps_e"] = summary.eps_e;
  j["eps_theta"] = summary.eps_theta;
  json rows = json::array();
  for (const CompareRow& row : summary.rows) {
    rows.push_back(
        json{{"run", row.run},
             {"algorithm", row.algorithm},
             {"first_k_abs_e_below",
              row.first_k_abs_e ? json(*row.first_k_abs_e) : json(nullptr)},
             {"first_k_param_err_below",
              row.first_k_param ? json(*row.first_k_param) : json(nullptr)},
             {"final_abs_e", row.final_abs_e},
             {"final_param_err", row.final_param_err},
             {"envelope", row.envelope}});
  }
  j["rows"] = rows;
  return j;
}

// ---- plot data --------------------------------------------------------------------

PlotQuantity plot_quantity_from_string(const std::string& name) {
  if (name == "e_y") return PlotQuantity::kEY;
  if (name == "param_err") return PlotQuantity::kParamErr;
  if (name == "v") return PlotQuantity::kV;
  throw ConfigError("unknown plot quantity '" + name +
                    "' (expected e_y, param_err, v)");
}

PlotScale plot_scale_from_string(const std::string& name) {
  if (name == "linear") return PlotScale::kLinear;
  if (name == "log10-abs") return PlotScale::kLog10Abs;
  throw ConfigError("unknown plot scale '" + name +
                    "' (expected linear, log10-abs)");
}

std::string to_string(PlotQuantity q) {
  switch (q) {
    case PlotQuantity::kEY:
      return "e_y";
    case PlotQuantity::kParamErr:
      return "param_err";
    case PlotQuantity::kV:
      return "v";
  }
  return "?";
}

std::string to_string(PlotScale s) {
  return s == PlotScale::kLinear ? "linear" : "log10-abs";
}

void write_plot_columns(std::ostream& out, const std::vector<TraceRecord>& trace,
                        PlotQuantity quantity, PlotScale scale) {
  if (trace.empty()) throw InvalidArgumentError("write_plot_columns: empty trace");
  if (quantity == PlotQuantity::kV) {
    for (const TraceRecord& rec : trace) {
      if (!rec.v) {
        throw UnavailableQuantityError("trace '" + trace.front().algorithm +
                                       "' carries no Lyapunov column");
      }
    }
  }
  out << "k,";
  if (scale == PlotScale::kLog10Abs) out << "log10_abs_";
  out << to_string(quantity) << '\n';

  for (const TraceRecord& rec : trace) {
    double val = 0.0;
    switch (quantity) {
      case PlotQuantity::kEY:
        val = rec.e_y;
        break;
      case PlotQuantity::kParamErr:
        val = rec.param_err;
        break;
      case PlotQuantity::kV:
        val = *rec.v;
        break;
    }
    if (scale == PlotScale::kLog10Abs) {
      // Floor keeps exact zeros finite on the log axis.
      val = std::log10(std::max(std::abs(val), 1e-300));
    }
    out << rec.k << ',' << detail::fmt17(val) << '\n';
  }
}

std::vector<fs::path> emit_plot_data(const RunArtifact& art, PlotQuantity quantity,
                                     PlotScale scale, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw InvalidArgumentError("cannot create output directory '" + dir.string() +
                               "': " + ec.message());
  }
  std::vector<fs::path> written;
  for (const AlgorithmRunResult& res : art.results) {
    const fs::path p = dir / (res.algo.label + "." + to_string(quantity) + "." +
                              to_string(scale) + ".csv");
    std::ofstream out(p);
    if (!out) {
      throw InvalidArgumentError("cannot open '" + p.string() + "' for writing");
    }
    write_plot_columns(out, res.trace, quantity, scale);
    written.push_back(p);
  }
  return written;
}

}  // namespace hotuner::harness
