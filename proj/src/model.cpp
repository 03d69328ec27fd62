#include "kimura_mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kimura_mfg/errors.hpp"

namespace kmfg {

using nlohmann::json;

double phi_eval(double r, double kappa, double delta) {
  if (!(r >= 0.0)) throw InvalidInput("phi: argument must be nonnegative");
  if (!(delta > 0.0)) throw InvalidInput("phi: delta must be positive");
  if (!(kappa >= 0.0)) throw InvalidInput("phi: kappa must be nonnegative");
  if (r <= delta) return kappa;
  if (r > 2.0 * delta) return 0.0;
  return kappa * (2.0 * delta - r) / delta;
}

double hamiltonian(const Vec& y, int i) {
  double s = 0.0;
  for (double yj : y) {
    const double v = std::max(y[i] - yj, 0.0);
    s += v * v;
  }
  return -0.5 * s;
}

double optimal_rate(const Vec& y, int i, int j) {
  if (i == j) throw InvalidInput("optimal_rate: i must differ from j");
  return std::max(y[i] - y[j], 0.0);
}

// ---- cost families ----------------------------------------------------------

CostFamily CostFamily::constant(Vec c) {
  CostFamily f;
  f.kind_ = Kind::Constant;
  f.c_ = std::move(c);
  return f;
}

CostFamily CostFamily::linear(Vec c, std::vector<Vec> a) {
  CostFamily f;
  f.kind_ = Kind::Linear;
  f.c_ = std::move(c);
  f.a_ = std::move(a);
  return f;
}

CostFamily CostFamily::quadratic(Vec c, std::vector<Vec> a, std::vector<Vec> b) {
  CostFamily f;
  f.kind_ = Kind::Quadratic;
  f.c_ = std::move(c);
  f.a_ = std::move(a);
  f.b_ = std::move(b);
  return f;
}

CostFamily CostFamily::anti_monotone_pair(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidInput("anti-monotone-pair: gamma must be positive");
  }
  CostFamily f;
  f.kind_ = Kind::AntiMonotonePair;
  f.gamma_ = gamma;
  return f;
}

CostFamily CostFamily::tabulated(int d, int n, std::vector<Vec> values) {
  auto grid = std::make_shared<const SimplexGrid>(build_grid(d, n));
  if (values.size() != grid->size()) {
    throw InvalidInput("tabulated cost: table must cover every grid node");
  }
  for (const Vec& row : values) {
    if (static_cast<int>(row.size()) != d) {
      throw InvalidInput("tabulated cost: each node needs d values");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput("tabulated cost: non-finite value");
    }
  }
  CostFamily f;
  f.kind_ = Kind::Tabulated;
  f.table_n_ = n;
  f.table_ = std::move(values);
  f.grid_ = std::move(grid);
  return f;
}

std::string to_string(CostFamily::Kind k) {
  switch (k) {
    case CostFamily::Kind::Constant: return "constant";
    case CostFamily::Kind::Linear: return "linear";
    case CostFamily::Kind::Quadratic: return "quadratic";
    case CostFamily::Kind::AntiMonotonePair: return "anti-monotone-pair";
    case CostFamily::Kind::Tabulated: return "tabulated";
  }
  return "unknown";
}

namespace {

Vec vec_from(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string("cost params: ") + what + " must be an array");
  Vec v;
  for (const auto& x : j) {
    if (!x.is_number()) throw InvalidInput(std::string("cost params: ") + what + " must be numeric");
    v.push_back(x.get<double>());
  }
  return v;
}

std::vector<Vec> mat_from(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string("cost params: ") + what + " must be a matrix");
  std::vector<Vec> m;
  for (const auto& row : j) m.push_back(vec_from(row, what));
  return m;
}

void check_square(const std::vector<Vec>& m, int d, const char* what) {
  if (static_cast<int>(m.size()) != d) {
    throw InvalidInput(std::string("cost params: ") + what + " must be d x d");
  }
  for (const Vec& row : m) {
    if (static_cast<int>(row.size()) != d) {
      throw InvalidInput(std::string("cost params: ") + what + " must be d x d");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput(std::string("cost params: ") + what + " is not finite");
    }
  }
}

double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

void CostFamily::check_dimension(int d) const {
  switch (kind_) {
    case Kind::Quadratic:
      check_square(b_, d, "B");
      [[fallthrough]];
    case Kind::Linear:
      check_square(a_, d, "A");
      [[fallthrough]];
    case Kind::Constant:
      if (static_cast<int>(c_.size()) != d) throw InvalidInput("cost params: c must have d entries");
      for (double v : c_) {
        if (!std::isfinite(v)) throw InvalidInput("cost params: c is not finite");
      }
      break;
    case Kind::AntiMonotonePair:
      if (d != 2) throw InvalidInput("anti-monotone-pair cost requires d = 2");
      break;
    case Kind::Tabulated:
      if (grid_->d != d) throw InvalidInput("tabulated cost: dimension mismatch");
      break;
  }
}

CostFamily CostFamily::from_json(const json& j, int d) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw InvalidInput("cost family must be an object with a string 'kind'");
  }
  const std::string kind = j["kind"].get<std::string>();
  const json params = j.value("params", json::object());
  CostFamily f;
  if (kind == "constant") {
    f = constant(vec_from(params.at("c"), "c"));
  } else if (kind == "linear") {
    f = linear(vec_from(params.at("c"), "c"), mat_from(params.at("A"), "A"));
  } else if (kind == "quadratic") {
    f = quadratic(vec_from(params.at("c"), "c"), mat_from(params.at("A"), "A"),
                  mat_from(params.at("B"), "B"));
  } else if (kind == "anti-monotone-pair") {
    if (!params.contains("gamma") || !params["gamma"].is_number()) {
      throw InvalidInput("anti-monotone-pair: missing numeric 'gamma'");
    }
    f = anti_monotone_pair(params["gamma"].get<double>());
  } else if (kind == "tabulated") {
    if (!params.contains("n") || !params["n"].is_number_integer()) {
      throw InvalidInput("tabulated cost: missing integer 'n'");
    }
    f = tabulated(d, params["n"].get<int>(), mat_from(params.at("values"), "values"));
  } else {
    throw InvalidInput("unknown cost family kind '" + kind + "'");
  }
  if (params.contains("shift")) f.shift_ = params["shift"].get<double>();
  f.check_dimension(d);
  return f;
}

json CostFamily::to_json() const {
  json params = json::object();
  switch (kind_) {
    case Kind::Quadratic: params["B"] = b_; [[fallthrough]];
    case Kind::Linear: params["A"] = a_; [[fallthrough]];
    case Kind::Constant: params["c"] = c_; break;
    case Kind::AntiMonotonePair: params["gamma"] = gamma_; break;
    case Kind::Tabulated:
      params["n"] = table_n_;
      params["values"] = table_;
      break;
  }
  if (shift_ != 0.0) params["shift"] = shift_;
  return json{{"kind", to_string(kind_)}, {"params", params}};
}

double CostFamily::eval(double, int i, const SimplexPoint& p) const {
  double v = shift_;
  switch (kind_) {
    case Kind::Constant:
      return v + c_[i];
    case Kind::Linear:
    case Kind::Quadratic: {
      v += c_[i];
      const Vec& a = a_[i];
      for (std::size_t j = 0; j < p.size(); ++j) v += a[j] * p[j];
      if (kind_ == Kind::Quadratic) {
        const Vec& b = b_[i];
        for (std::size_t j = 0; j < p.size(); ++j) v += b[j] * p[j] * p[j];
      }
      return v;
    }
    case Kind::AntiMonotonePair:
      return v - gamma_ * (p[i] - 0.5);
    case Kind::Tabulated: {
      const Element e = locate(*grid_, p);
      for (int k = 0; k < e.count; ++k) v += e.weight[k] * table_[e.node[k]][i];
      return v;
    }
  }
  return v;
}

double CostFamily::sup_bound() const {
  double s = 0.0;
  switch (kind_) {
    case Kind::Constant:
      s = max_abs(c_);
      break;
    case Kind::Linear:
    case Kind::Quadratic:
      for (std::size_t i = 0; i < c_.size(); ++i) {
        double row = std::abs(c_[i]) + max_abs(a_[i]);
        if (kind_ == Kind::Quadratic) row += max_abs(b_[i]);
        s = std::max(s, row);
      }
      break;
    case Kind::AntiMonotonePair:
      s = 0.5 * gamma_;
      break;
    case Kind::Tabulated:
      for (const Vec& row : table_) s = std::max(s, max_abs(row));
      break;
  }
  return s + std::abs(shift_);
}

CostFamily CostFamily::shifted(double c) const {
  CostFamily f = *this;
  f.shift_ += c;
  return f;
}

// ---- model spec -------------------------------------------------------------

RegimeFlags ModelSpec::regime() const {
  const double e2 = eps * eps;
  RegimeFlags r;
  r.kappa_ge_half_eps2 = kappa >= 0.5 * e2;
  r.kappa_ge_61_eps2 = kappa >= 61.0 * e2;
  r.kappa_ge_61_plus_d_eps2 = kappa >= (61.0 + d) * e2;
  return r;
}

std::vector<std::string> ModelSpec::validate(ValidationOptions opt) const {
  if (d < 2) throw InvalidInput("d must be at least 2");
  if (!std::isfinite(eps) || eps >= 1.0 || eps < 0.0 || (eps == 0.0 && !opt.allow_zero_noise)) {
    throw InvalidInput("epsilon must lie in (0, 1)");
  }
  if (!std::isfinite(kappa) || kappa < 0.0 || (kappa == 0.0 && !opt.allow_zero_forcing)) {
    throw InvalidInput("kappa must be positive");
  }
  if (!std::isfinite(delta) || delta <= 0.0) throw InvalidInput("delta must be positive");
  if (delta >= 1.0 / (4.0 * std::sqrt(static_cast<double>(d)))) {
    std::ostringstream os;
    os << "delta must be below 1/(4 sqrt(d)) = " << 1.0 / (4.0 * std::sqrt(static_cast<double>(d)));
    throw InvalidInput(os.str());
  }
  if (!std::isfinite(T) || T <= 0.0) throw InvalidInput("T must be positive");
  f.check_dimension(d);
  g.check_dimension(d);

  std::vector<std::string> warn;
  const RegimeFlags r = regime();
  if (eps > 0.0) {
    if (!r.kappa_ge_half_eps2) warn.emplace_back("kappa < eps^2/2: boundary may be attained");
    if (!r.kappa_ge_61_eps2) warn.emplace_back("kappa < 61 eps^2: Q-dynamics regime not certified");
    if (!r.kappa_ge_61_plus_d_eps2) {
      warn.emplace_back("kappa < (61 + d) eps^2: master-equation regime not certified");
    }
  }
  return warn;
}

ModelSpec ModelSpec::from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("model must be a JSON object");
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw InvalidInput(std::string("model: missing numeric '") + key + "'");
    }
    return j[key].get<double>();
  };
  ModelSpec s;
  if (!j.contains("d") || !j["d"].is_number_integer()) {
    throw InvalidInput("model: missing integer 'd'");
  }
  s.d = j["d"].get<int>();
  if (s.d < 2) throw InvalidInput("d must be at least 2");
  s.eps = num("epsilon");
  s.kappa = num("kappa");
  s.delta = num("delta");
  s.T = num("T");
  if (!j.contains("f") || !j.contains("g")) throw InvalidInput("model: missing cost families f and g");
  s.f = CostFamily::from_json(j["f"], s.d);
  s.g = CostFamily::from_json(j["g"], s.d);
  return s;
}

json ModelSpec::to_json() const {
  return json{{"d", d},         {"epsilon", eps}, {"kappa", kappa}, {"delta", delta},
              {"T", T},         {"f", f.to_json()}, {"g", g.to_json()}};
}

// ---- strategies -------------------------------------------------------------

void RateMatrix::fix_diagonal() {
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j != i) s += (*this)(i, j);
    }
    (*this)(i, i) = -s;
  }
}

FeedbackStrategy::FeedbackStrategy(Fill fill, double sup_bound)
    : fill_(std::move(fill)), sup_(sup_bound) {}

FeedbackStrategy FeedbackStrategy::zero() { return FeedbackStrategy(); }

FeedbackStrategy FeedbackStrategy::constant(const RateMatrix& rates) {
  double sup = 0.0;
  for (int i = 0; i < rates.d; ++i) {
    for (int j = 0; j < rates.d; ++j) {
      if (i == j) continue;
      if (!(rates(i, j) >= 0.0)) throw InvalidInput("strategy rates must be nonnegative");
      sup = std::max(sup, rates(i, j));
    }
  }
  RateMatrix copy = rates;
  return FeedbackStrategy([copy](double, const SimplexPoint&, RateMatrix& out) { out = copy; },
                          sup);
}

void FeedbackStrategy::rates(double t, const SimplexPoint& p, RateMatrix& out) const {
  const int d = static_cast<int>(p.size());
  if (out.d != d) out = RateMatrix(d);
  if (!fill_) {
    std::fill(out.r.begin(), out.r.end(), 0.0);
    return;
  }
  fill_(t, p, out);
  out.fix_diagonal();
}

double FeedbackStrategy::rate(double t, int i, const SimplexPoint& p, int j) const {
  RateMatrix m(static_cast<int>(p.size()));
  rates(t, p, m);
  return m(i, j);
}

Vec drift_a(const SimplexPoint& p, const RateMatrix& rates, const ModelSpec& spec) {
  const int d = static_cast<int>(p.size());
  Vec phi(d);
  for (int i = 0; i < d; ++i) phi[i] = phi_eval(std::max(p[i], 0.0), spec.kappa, spec.delta);
  Vec a(d, 0.0);
  const bool has_rates = rates.d == d;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double rji = has_rates ? rates(j, i) : 0.0;
      const double rij = has_rates ? rates(i, j) : 0.0;
      const double flux = p[j] * (phi[i] + rji) - p[i] * (phi[j] + rij);
      a[i] += flux;
      a[j] -= flux;
    }
  }
  return a;
}

Vec drift_a(double t, const SimplexPoint& p, const FeedbackStrategy& alpha,
            const ModelSpec& spec) {
  RateMatrix m(static_cast<int>(p.size()));
  alpha.rates(t, p, m);
  return drift_a(p, m, spec);
}

CoefficientsBF coefficients_BF(double t, const SimplexPoint& p, const Vec& y, int i,
                               const ModelSpec& spec) {
  const int d = static_cast<int>(p.size());
  Vec phi(d);
  double sum_phi = 0.0;
  for (int k = 0; k < d; ++k) {
    phi[k] = phi_eval(std::max(p[k], 0.0), spec.kappa, spec.delta);
    sum_phi += phi[k];
  }
  const double e2 = spec.eps * spec.eps;
  CoefficientsBF out;
  out.B.assign(d, 0.0);
  for (int j = 0; j < d; ++j) {
    double in = 0.0, out_rate = 0.0;
    for (int k = 0; k < d; ++k) {
      in += p[k] * std::max(y[k] - y[j], 0.0);
      out_rate += std::max(y[j] - y[k], 0.0);
    }
    out.B[j] = phi[j] + in - p[j] * (sum_phi + out_rate) + e2 * ((i == j ? 1.0 : 0.0) - p[j]);
  }
  double coupling = 0.0;
  for (int j = 0; j < d; ++j) coupling += phi[j] * (y[j] - y[i]);
  out.F = hamiltonian(y, i) + spec.f.eval(t, i, p) + coupling;
  return out;
}

}  // namespace kmfg
