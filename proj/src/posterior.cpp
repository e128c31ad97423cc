#include "dqf/posterior.hpp"

#include "dqf/errors.hpp"

#include <cmath>
#include <limits>

namespace dqf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Which cached part a coordinate feeds: 0..3 margins, 4 correlations, 5 nu.
int part_of(int k) {
  if (k < idx::kH) return k / 8;
  if (k < idx::kR) return 3;
  if (k < idx::kNu) return 4;
  return 5;
}

}  // namespace

DqfPosterior::DqfPosterior(XiSeries xi, const DqfTheta& theta0)
    : DqfPosterior(xi, theta0, filter_init(xi)) {}

DqfPosterior::DqfPosterior(XiSeries xi, const DqfTheta& theta0, const FilterInit& init)
    : xi_(std::move(xi)), init_(init) {
  for (int i = 0; i < 4; ++i) cols_[i] = xi_.column(i);
  reset(to_vector(theta0));
}

DqfTheta DqfPosterior::to_theta(const Eigen::VectorXd& x) {
  DqfTheta th;
  for (int k = 0; k < kThetaDim; ++k) th[k] = x(k);
  return th;
}

Eigen::VectorXd DqfPosterior::to_vector(const DqfTheta& theta) {
  Eigen::VectorXd x(kThetaDim);
  for (int k = 0; k < kThetaDim; ++k) x(k) = theta[k];
  return x;
}

DqfTheta DqfPosterior::theta() const { return to_theta(x_); }

bool DqfPosterior::admissible(const Eigen::VectorXd& x) const { return in_region(to_theta(x)); }

bool DqfPosterior::eval_scores(int i, const dist::StudentT& t, Cache& c) const {
  const auto& pit = c.terms[i].pit;
  auto& sc = c.scores[i];
  sc.resize(pit.size());
  double s = 0.0;
  for (std::size_t k = 0; k < pit.size(); ++k) {
    sc[k] = t.quantile(std::clamp(pit[k], dist::kCopulaClamp, 1.0 - dist::kCopulaClamp));
    s += t.logpdf(sc[k]);
  }
  c.tlog_sum[i] = s;
  return std::isfinite(s);
}

bool DqfPosterior::eval_margin(int i, const DqfTheta& theta, const dist::StudentT& t, Cache& c) const {
  bool ok = i < 3 ? margin_terms(theta.margin(i), cols_[i], init_.mu0[i], init_.sigma2_0[i], c.terms[i])
                  : h_terms(theta.h(), cols_[3], init_.mu4_0, c.terms[3]);
  if (!ok) {
    c.margin_sum[i] = kNegInf;
    return false;
  }
  double s = 0.0;
  for (double v : c.terms[i].logpdf) s += v;
  c.margin_sum[i] = s;
  return eval_scores(i, t, c);
}

void DqfPosterior::eval_copula(const DqfTheta& theta, Cache& c) const {
  const dist::TCopula cop(theta.copula());
  const std::size_t T = xi_.size();
  double s = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    const std::array<double, 4> x = {c.scores[0][k], c.scores[1][k], c.scores[2][k], c.scores[3][k]};
    s += cop.mvt_logdensity(x);
  }
  c.mvt_sum = s;
}

void DqfPosterior::full(const DqfTheta& theta, Cache& c) const {
  c.prior = logprior(theta);
  c.kernel = kNegInf;
  if (!std::isfinite(c.prior)) return;
  const dist::StudentT t(theta.nu());
  for (int i = 0; i < 4; ++i) {
    if (!eval_margin(i, theta, t, c)) return;
  }
  eval_copula(theta, c);
  double k = c.prior + c.mvt_sum;
  for (int i = 0; i < 4; ++i) k += c.margin_sum[i] - c.tlog_sum[i];
  c.kernel = std::isfinite(k) ? k : kNegInf;
}

void DqfPosterior::reset(const Eigen::VectorXd& x) {
  if (x.size() != kThetaDim) throw DomainError("DqfPosterior: state must have 40 entries");
  x_ = x;
  full(to_theta(x_), cur_);
  staged_valid_ = false;
}

double DqfPosterior::stage(const BlockSpec& block, const Eigen::VectorXd& values) {
  staged_x_ = x_;
  bool touches[6] = {};
  for (int k = 0; k < block.dim(); ++k) {
    staged_x_(block.members[k]) = values(k);
    touches[part_of(block.members[k])] = true;
  }
  staged_margin_ = {touches[0], touches[1], touches[2], touches[3]};
  staged_nu_ = touches[5];
  staged_valid_ = false;
  staged_.kernel = kNegInf;

  const DqfTheta theta = to_theta(staged_x_);
  staged_.prior = logprior(theta);
  if (!std::isfinite(staged_.prior)) return kNegInf;

  const dist::StudentT t(theta.nu());
  for (int i = 0; i < 4; ++i) {
    if (staged_margin_[i]) {
      if (!eval_margin(i, theta, t, staged_)) return kNegInf;
    } else if (staged_nu_) {
      staged_.terms[i].pit = cur_.terms[i].pit;
      if (!eval_scores(i, t, staged_)) return kNegInf;
    }
  }
  const bool new_scores = staged_nu_ || staged_margin_[0] || staged_margin_[1] || staged_margin_[2] ||
                          staged_margin_[3];

  // Borrow unchanged score vectors from the committed cache for the copula sum.
  std::array<bool, 4> own{};
  for (int i = 0; i < 4; ++i) {
    own[i] = staged_margin_[i] || staged_nu_;
    if (!own[i]) staged_.scores[i].swap(cur_.scores[i]);
  }
  if (new_scores || touches[4]) {
    eval_copula(theta, staged_);
  } else {
    staged_.mvt_sum = cur_.mvt_sum;
  }
  for (int i = 0; i < 4; ++i) {
    if (!own[i]) staged_.scores[i].swap(cur_.scores[i]);
  }

  double k = staged_.prior + staged_.mvt_sum;
  for (int i = 0; i < 4; ++i) {
    k += (staged_margin_[i] ? staged_.margin_sum[i] : cur_.margin_sum[i]) -
         (own[i] ? staged_.tlog_sum[i] : cur_.tlog_sum[i]);
  }
  staged_.kernel = std::isfinite(k) ? k : kNegInf;
  staged_valid_ = std::isfinite(k);
  return staged_.kernel;
}

void DqfPosterior::commit() {
  if (!staged_valid_) throw NumericalError("DqfPosterior: commit without a valid staged move");
  for (int i = 0; i < 4; ++i) {
    if (staged_margin_[i]) {
      cur_.terms[i].logpdf.swap(staged_.terms[i].logpdf);
      cur_.margin_sum[i] = staged_.margin_sum[i];
    }
    if (staged_margin_[i] || staged_nu_) {
      cur_.terms[i].pit.swap(staged_.terms[i].pit);
      cur_.scores[i].swap(staged_.scores[i]);
      cur_.tlog_sum[i] = staged_.tlog_sum[i];
    }
  }
  cur_.mvt_sum = staged_.mvt_sum;
  cur_.prior = staged_.prior;
  cur_.kernel = staged_.kernel;
  x_.swap(staged_x_);
  staged_valid_ = false;
}

void DqfPosterior::discard() { staged_valid_ = false; }

// ---------------------------------------------------------------------------

Eigen::VectorXd initial_proposal_sd(const DqfTheta& theta0, const XiSeries& xi) {
  const double root_t = std::sqrt(static_cast<double>(std::max<std::size_t>(xi.size(), 1)));
  Eigen::VectorXd sd(kThetaDim);
  for (int i = 0; i < 3; ++i) {
    const auto col = xi.column(i);
    double m = 0.0, v = 0.0;
    for (double x : col) m += x;
    m /= static_cast<double>(col.size());
    for (double x : col) v += (x - m) * (x - m);
    const double s = std::sqrt(v / static_cast<double>(std::max<std::size_t>(col.size() - 1, 1)));
    const int o = idx::kMargin[i];
    sd(o + idx::kDelta) = std::max(0.1 * s / root_t, 1e-10);
    sd(o + idx::kPsi) = 0.01;
    sd(o + idx::kPhi) = 0.01;
    sd(o + idx::kOmega) = 0.2 * theta0[o + idx::kOmega];
    sd(o + idx::kAlpha) = 0.01;
    sd(o + idx::kBeta) = 0.01;
    sd(o + idx::kEta) = 1.0;
    sd(o + idx::kLambda) = 0.03;
  }
  sd(idx::kH + 0) = std::max(0.1 * theta0[idx::kH], 1e-5);
  sd(idx::kH + 1) = 0.01;
  sd(idx::kH + 2) = 0.01;
  sd(idx::kGammaStar) = 0.1;
  sd(idx::kC) = 0.01;
  sd(idx::kSigma) = 0.02 * theta0[idx::kSigma];
  sd(idx::kEta4) = 1.0;
  sd(idx::kLambda4) = 0.03;
  sd(idx::kIota) = 0.2 * theta0[idx::kIota];
  for (int k = 0; k < 6; ++k) sd(idx::kR + k) = 0.02;
  sd(idx::kNu) = 1.0;
  return sd;
}

}  // namespace dqf
