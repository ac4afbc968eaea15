#include <hotuner/regress.hpp>

#include "detail_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hotuner::regress {

RegressorSample make_sample(long k, ParameterVector phi, double y) {
  RegressorSample s;
  s.k = k;
  s.phi = std::move(phi);
  s.y = y;
  s.norm_sq = squared_norm_lr(s.phi);
  s.n_k = 1.0 + s.norm_sq;
  return s;
}

// ---- plant ------------------------------------------------------------------

ParameterVector PlantSpec::theta_star() const {
  ParameterVector t(dimension());
  long at = 0;
  for (double a : a_coeffs) t[at++] = -a;
  for (double b : b_coeffs) t[at++] = b;
  for (double c : c_coeffs) t[at++] = c;
  return t;
}

namespace {

void validate_lag_ref(const LagRef& ref, long n, long m, long d) {
  if (ref.signal == LagRef::Signal::kOutput) {
    if (ref.lag < 1 || ref.lag > n) {
      throw InvalidSpecError("basis function references output lag " +
                             std::to_string(ref.lag) + " outside [1, " +
                             std::to_string(n) + "]");
    }
  } else {
    if (ref.lag < 1 + d || ref.lag > m + d) {
      throw InvalidSpecError("basis function references input lag " +
                             std::to_string(ref.lag) + " outside [" +
                             std::to_string(1 + d) + ", " + std::to_string(m + d) +
                             "]");
    }
  }
}

void validate_basis_fn(const BasisFn& fn, long n, long m, long d) {
  switch (fn.kind) {
    case BasisFn::Kind::kMonomialProduct:
      for (const LagRef& ref : fn.lag_refs) {
        if (ref.exponent < 1) {
          throw InvalidSpecError("monomial exponent must be >= 1, got " +
                                 std::to_string(ref.exponent));
        }
        validate_lag_ref(ref, n, m, d);
      }
      break;
    case BasisFn::Kind::kSineOfLag:
    case BasisFn::Kind::kSaturationOfLag:
      if (fn.lag_refs.size() != 1) {
        throw InvalidSpecError(
            "sine/saturation basis functions take exactly one lag reference, got " +
            std::to_string(fn.lag_refs.size()));
      }
      validate_lag_ref(fn.lag_refs[0], n, m, d);
      break;
  }
  if (!std::isfinite(fn.scale)) {
    throw InvalidSpecError("basis function scale must be finite");
  }
}

}  // namespace

void PlantSpec::validate() const {
  if (delay_d < 0) {
    throw InvalidSpecError("plant delay must be nonnegative, got " +
                           std::to_string(delay_d));
  }
  if (p() != static_cast<long>(basis.size())) {
    throw InvalidSpecError("plant has " + std::to_string(p()) +
                           " c-coefficients but " + std::to_string(basis.size()) +
                           " basis functions");
  }
  if (static_cast<long>(initial_outputs.size()) != n()) {
    throw InvalidSpecError("plant needs " + std::to_string(n()) +
                           " initial outputs, got " +
                           std::to_string(initial_outputs.size()));
  }
  if (dimension() < 1) {
    throw InvalidSpecError("plant emits an empty regressor (n = m = p = 0)");
  }
  for (const BasisFn& fn : basis) validate_basis_fn(fn, n(), m(), delay_d);
}

double InputSignal::eval(long k) const {
  switch (kind) {
    case Kind::kConstant:
      return value;
    case Kind::kSamples:
      // A recorded sequence only covers the run itself; lags reaching
      // before it are taken as quiescent.
      if (k <= 0) return 0.0;
      if (k > static_cast<long>(samples.size())) {
        throw InvalidSpecError("input sample sequence has " +
                               std::to_string(samples.size()) +
                               " values but u_k is required at k=" +
                               std::to_string(k));
      }
      return samples[k - 1];
    case Kind::kSinusoid:
      return offset + amplitude * std::sin(omega * static_cast<double>(k) + phase);
  }
  return 0.0;  // unreachable
}

double Sinusoid::eval(long k) const {
  return offset + amplitude * std::sin(omega * static_cast<double>(k) + phase);
}

// ---- sources ----------------------------------------------------------------

long RegressorSource::dimension() const {
  switch (kind) {
    case Kind::kConstant:
      return constant_phi.size();
    case Kind::kPiecewiseConstant:
      return segments.empty() ? 0 : segments.front().phi.size();
    case Kind::kSinusoidBank:
      return static_cast<long>(components.size());
    case Kind::kPlant:
      return plant.dimension();
    case Kind::kFile:
      return -1;  // known once the header is read
  }
  return 0;
}

void RegressorSource::validate() const {
  switch (kind) {
    case Kind::kConstant:
      if (constant_phi.size() < 1) {
        throw InvalidSpecError("constant source has an empty regressor");
      }
      break;
    case Kind::kPiecewiseConstant: {
      if (segments.empty()) {
        throw InvalidSpecError("piecewise-constant source has no segments");
      }
      if (segments.front().start_k != 1) {
        throw InvalidSpecError("piecewise segments must start at k=1, got " +
                               std::to_string(segments.front().start_k));
      }
      const Eigen::Index d = segments.front().phi.size();
      if (d < 1) throw InvalidSpecError("piecewise segment has an empty regressor");
      long prev = 0;
      for (const PiecewiseSegment& seg : segments) {
        if (seg.start_k <= prev) {
          throw InvalidSpecError("piecewise segment starts must strictly increase");
        }
        if (seg.phi.size() != d) {
          throw InvalidSpecError("piecewise segments disagree on dimension");
        }
        prev = seg.start_k;
      }
      break;
    }
    case Kind::kSinusoidBank:
      if (components.empty()) {
        throw InvalidSpecError("sinusoid-bank source has no components");
      }
      break;
    case Kind::kPlant:
      plant.validate();
      break;
    case Kind::kFile:
      if (file_path.empty()) {
        throw InvalidSpecError("file source has an empty path");
      }
      break;
  }
}

// ---- regressor assembly -----------------------------------------------------

namespace {

double lag_value(const LagRef& ref, const ParameterVector& z,
                 const ParameterVector& v, long d) {
  validate_lag_ref(ref, z.size(), v.size(), d);
  if (ref.signal == LagRef::Signal::kOutput) return z[ref.lag - 1];
  return v[ref.lag - d - 1];
}

double eval_basis_fn(const BasisFn& fn, const ParameterVector& z,
                     const ParameterVector& v, long d) {
  switch (fn.kind) {
    case BasisFn::Kind::kMonomialProduct: {
      double r = 1.0;
      for (const LagRef& ref : fn.lag_refs) {
        if (ref.exponent < 1) {
          throw InvalidSpecError("monomial exponent must be >= 1, got " +
                                 std::to_string(ref.exponent));
        }
        const double val = lag_value(ref, z, v, d);
        double pw = 1.0;  // repeated multiplication keeps the rounding fixed
        for (long e = 0; e < ref.exponent; ++e) pw *= val;
        r *= pw;
      }
      return r;
    }
    case BasisFn::Kind::kSineOfLag: {
      if (fn.lag_refs.size() != 1) {
        throw InvalidSpecError("sine basis function takes exactly one lag reference");
      }
      return std::sin(fn.scale * lag_value(fn.lag_refs[0], z, v, d));
    }
    case BasisFn::Kind::kSaturationOfLag: {
      if (fn.lag_refs.size() != 1) {
        throw InvalidSpecError(
            "saturation basis function takes exactly one lag reference");
      }
      return std::clamp(fn.scale * lag_value(fn.lag_refs[0], z, v, d), -1.0, 1.0);
    }
  }
  return 0.0;  // unreachable
}

}  // namespace

ParameterVector build_regressor(const ParameterVector& z_lags,
                                const ParameterVector& v_lags,
                                const std::vector<BasisFn>& basis, long delay_d) {
  const long n = z_lags.size();
  const long m = v_lags.size();
  const long p = static_cast<long>(basis.size());
  ParameterVector phi(n + m + p);
  for (long i = 0; i < n; ++i) phi[i] = z_lags[i];
  for (long j = 0; j < m; ++j) phi[n + j] = v_lags[j];
  for (long l = 0; l < p; ++l) {
    phi[n + m + l] = eval_basis_fn(basis[l], z_lags, v_lags, delay_d);
  }
  return phi;
}

// ---- generation -------------------------------------------------------------

std::vector<RegressorSample> simulate_plant(const PlantSpec& spec,
                                            const InputSignal& input,
                                            long horizon) {
  if (horizon < 1) {
    throw InvalidArgumentError("simulate_plant: horizon must be >= 1, got " +
                               std::to_string(horizon));
  }
  spec.validate();

  const long n = spec.n();
  const long m = spec.m();
  const long d = spec.delay_d;
  const ParameterVector tstar = spec.theta_star();

  // Chronological output history: hist[i] = y at time (1 - n) + i, seeded
  // from initial_outputs = [y_0, y_{-1}, ..., y_{1-n}].
  std::vector<double> hist;
  hist.reserve(static_cast<std::size_t>(n + horizon));
  for (long i = 0; i < n; ++i) hist.push_back(spec.initial_outputs[n - 1 - i]);

  std::vector<RegressorSample> out;
  out.reserve(static_cast<std::size_t>(horizon));
  ParameterVector z(n), v(m);
  for (long k = 1; k <= horizon; ++k) {
    for (long i = 1; i <= n; ++i) z[i - 1] = hist[k - i + n - 1];
    for (long j = 1; j <= m; ++j) v[j - 1] = input.eval(k - j - d);
    ParameterVector phi = build_regressor(z, v, spec.basis, d);
    if (!all_finite(phi)) throw DivergenceError("plant", k);
    const double y = dot_lr(phi, tstar);
    if (!std::isfinite(y)) throw DivergenceError("plant", k);
    out.push_back(make_sample(k, std::move(phi), y));
    hist.push_back(y);
  }
  return out;
}

std::vector<RegressorSample> regressor_stream(const RegressorSource& source,
                                              const ParameterVector& theta_star,
                                              long horizon) {
  if (horizon < 1) {
    throw InvalidArgumentError("regressor_stream: horizon must be >= 1, got " +
                               std::to_string(horizon));
  }
  source.validate();

  if (source.kind == RegressorSource::Kind::kPlant) {
    // The plant carries its own coefficient vector; theta_star is ignored.
    return simulate_plant(source.plant, source.input, horizon);
  }

  auto check_dim = [&](long d) {
    if (d != theta_star.size()) {
      throw InvalidSpecError("source dimension " + std::to_string(d) +
                             " does not match theta_star dimension " +
                             std::to_string(theta_star.size()));
    }
  };

  std::vector<RegressorSample> out;
  out.reserve(static_cast<std::size_t>(horizon));

  switch (source.kind) {
    case RegressorSource::Kind::kConstant: {
      check_dim(source.constant_phi.size());
      const double y = dot_lr(source.constant_phi, theta_star);
      for (long k = 1; k <= horizon; ++k) {
        out.push_back(make_sample(k, source.constant_phi, y));
      }
      break;
    }
    case RegressorSource::Kind::kPiecewiseConstant: {
      check_dim(source.segments.front().phi.size());
      std::size_t seg = 0;
      double y = dot_lr(source.segments[0].phi, theta_star);
      for (long k = 1; k <= horizon; ++k) {
        while (seg + 1 < source.segments.size() &&
               source.segments[seg + 1].start_k <= k) {
          ++seg;
          y = dot_lr(source.segments[seg].phi, theta_star);
        }
        out.push_back(make_sample(k, source.segments[seg].phi, y));
      }
      break;
    }
    case RegressorSource::Kind::kSinusoidBank: {
      const long d = static_cast<long>(source.components.size());
      check_dim(d);
      ParameterVector phi(d);
      for (long k = 1; k <= horizon; ++k) {
        for (long i = 0; i < d; ++i) phi[i] = source.components[i].eval(k);
        out.push_back(make_sample(k, phi, dot_lr(phi, theta_star)));
      }
      break;
    }
    case RegressorSource::Kind::kFile: {
      FileRegressorData data = read_regressor_csv(source.file_path);
      if (!data.samples.empty()) {
        check_dim(data.samples.front().phi.size());
      } else {
        throw InvalidSpecError(source.file_path + ": no data rows");
      }
      if (static_cast<long>(data.samples.size()) < horizon) {
        throw InvalidSpecError(source.file_path + ": file provides " +
                               std::to_string(data.samples.size()) +
                               " rows but horizon is " + std::to_string(horizon));
      }
      for (long i = 0; i < horizon; ++i) {
        RegressorSample& s = data.samples[i];
        if (!data.has_y) s.y = dot_lr(s.phi, theta_star);
        out.push_back(std::move(s));
      }
      break;
    }
    case RegressorSource::Kind::kPlant:
      break;  // handled above
  }
  return out;
}

// ---- file source ------------------------------------------------------------

FileRegressorData read_regressor_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open for reading");

  auto fail = [&](long line_no, const std::string& what) -> ParseError {
    return ParseError(path + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  detail::strip_cr(line);
  std::vector<std::string_view> header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "k") {
    throw fail(1, "header must start with 'k,phi_1,...'");
  }

  bool has_y = header.back() == "y";
  const long dim = static_cast<long>(header.size()) - 1 - (has_y ? 1 : 0);
  if (dim < 1) throw fail(1, "no phi columns in header");
  for (long i = 0; i < dim; ++i) {
    const std::string want = "phi_" + std::to_string(i + 1);
    if (header[1 + i] != want) {
      throw fail(1, "expected column '" + want + "', got '" +
                        std::string(header[1 + i]) + "'");
    }
  }

  FileRegressorData data;
  data.has_y = has_y;
  const std::size_t want_fields = header.size();
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;  // tolerate a trailing blank line
    std::vector<std::string_view> fields = detail::split_csv(line);
    if (fields.size() != want_fields) {
      throw fail(line_no, "expected " + std::to_string(want_fields) +
                              " fields, got " + std::to_string(fields.size()));
    }
    long k = 0;
    if (!detail::parse_long(fields[0], k)) {
      throw fail(line_no, "bad iteration index '" + std::string(fields[0]) + "'");
    }
    ParameterVector phi(dim);
    for (long i = 0; i < dim; ++i) {
      if (!detail::parse_double(fields[1 + i], phi[i])) {
        throw fail(line_no, "bad value '" + std::string(fields[1 + i]) +
                                "' in column phi_" + std::to_string(i + 1));
      }
    }
    double y = 0.0;
    if (has_y && !detail::parse_double(fields[1 + dim], y)) {
      throw fail(line_no, "bad value '" + std::string(fields[1 + dim]) +
                              "' in column y");
    }
    data.samples.push_back(make_sample(k, std::move(phi), y));
  }
  return data;
}

}  // namespace hotuner::regress
