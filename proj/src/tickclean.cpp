#include "dqf/tickclean.hpp"

#include "dqf/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dqf {

namespace {

std::vector<std::size_t> kept_indices(const TickDay& d) {
  std::vector<std::size_t> k;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.flags[i] == kKept) k.push_back(i);
  }
  return k;
}

// Linear-interpolation sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& s, double p) {
  const double h = (static_cast<double>(s.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

int parse_hhmm(const std::string& s, const std::string& where) {
  int h = -1, m = -1;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d:%d%c", &h, &m, &tail) != 2 || h < 0 || h > 23 || m < 0 || m > 59)
    throw DataError(where + ": bad time '" + s + "'");
  return 3600 * h + 60 * m;
}

Session parse_session(const std::string& s, const std::string& where) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw DataError(where + ": bad session '" + s + "'");
  Session out{parse_hhmm(s.substr(0, dash), where), parse_hhmm(s.substr(dash + 1), where)};
  if (out.end <= out.start) throw DataError(where + ": session ends before it starts");
  return out;
}

}  // namespace

// --- TickDay --------------------------------------------------------------

std::size_t TickDay::surviving_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), kKept));
}

std::vector<double> TickDay::surviving_prices() const {
  std::vector<double> p;
  for (std::size_t i = 0; i < size(); ++i) {
    if (flags[i] == kKept) p.push_back(prices[i]);
  }
  return p;
}

TickDay TickDay::surviving() const {
  TickDay d;
  d.date = date;
  for (std::size_t i = 0; i < size(); ++i) {
    if (flags[i] != kKept) continue;
    d.seconds.push_back(seconds[i]);
    d.prices.push_back(prices[i]);
  }
  d.flags.assign(d.prices.size(), kKept);
  return d;
}

// --- dates ----------------------------------------------------------------

Date parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) throw DataError("bad date '" + s + "'");
  const Date out{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!out.ok()) throw DataError("invalid date '" + s + "'");
  return out;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_timestamp(Date d, int seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, " %02d:%02d:%02d", seconds / 3600, (seconds / 60) % 60, seconds % 60);
  return format_date(d) + buf;
}

// --- calendar -------------------------------------------------------------

void SessionCalendar::add(const std::string& instrument, CalendarBlock block) {
  using std::chrono::sys_days;
  if (block.sessions.empty() || block.sessions.size() > 2)
    throw DataError(instrument + ": a block needs one or two sessions");
  if (sys_days(block.to) < sys_days(block.from)) throw DataError(instrument + ": date range reversed");
  std::sort(block.sessions.begin(), block.sessions.end(),
            [](const Session& a, const Session& b) { return a.start < b.start; });
  if (block.sessions.size() == 2 && block.sessions[1].start <= block.sessions[0].end)
    throw DataError(instrument + ": overlapping sessions");
  auto& list = blocks_[instrument];
  if (!list.empty() && sys_days(list.back().to) + std::chrono::days{1} != sys_days(block.from))
    throw DataError(instrument + ": date ranges must be contiguous, gap or overlap at " + format_date(block.from));
  list.push_back(std::move(block));
}

SessionCalendar SessionCalendar::parse(const std::string& text) {
  SessionCalendar cal;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string w; ls >> w;) tok.push_back(w);
    if (tok.empty()) continue;
    const std::string where = "calendar line " + std::to_string(lineno);
    if (tok.size() < 4 || tok.size() > 5) throw DataError(where + ": expected 4 or 5 fields");
    CalendarBlock b;
    b.from = parse_date(tok[1]);
    b.to = parse_date(tok[2]);
    for (std::size_t k = 3; k < tok.size(); ++k) b.sessions.push_back(parse_session(tok[k], where));
    cal.add(tok[0], std::move(b));
  }
  return cal;
}

SessionCalendar SessionCalendar::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calendar " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool SessionCalendar::covers(const std::string& instrument, Date date) const {
  const auto it = blocks_.find(instrument);
  if (it == blocks_.end()) return false;
  const auto d = std::chrono::sys_days(date);
  for (const auto& b : it->second) {
    if (std::chrono::sys_days(b.from) <= d && d <= std::chrono::sys_days(b.to)) return true;
  }
  return false;
}

const std::vector<Session>& SessionCalendar::sessions(const std::string& instrument, Date date) const {
  const auto it = blocks_.find(instrument);
  if (it == blocks_.end()) throw DataError("calendar has no instrument '" + instrument + "'");
  const auto d = std::chrono::sys_days(date);
  for (const auto& b : it->second) {
    if (std::chrono::sys_days(b.from) <= d && d <= std::chrono::sys_days(b.to)) return b.sessions;
  }
  throw DataError("calendar for '" + instrument + "' does not cover " + format_date(date));
}

std::vector<std::string> SessionCalendar::instruments() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : blocks_) out.push_back(k);
  return out;
}

const std::vector<CalendarBlock>& SessionCalendar::blocks(const std::string& instrument) const {
  const auto it = blocks_.find(instrument);
  if (it == blocks_.end()) throw DataError("calendar has no instrument '" + instrument + "'");
  return it->second;
}

// --- L1 spline ------------------------------------------------------------

double l1_spline_objective(const std::vector<double>& y, const std::vector<double>& z, double lambda) {
  double fit = 0.0, pen = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) fit += std::abs(z[i] - y[i]);
  for (std::size_t i = 0; i + 2 < z.size(); ++i) {
    const double d = z[i] - 2.0 * z[i + 1] + z[i + 2];
    pen += d * d;
  }
  return fit + lambda * pen;
}

SplitBregmanResult split_bregman_l1_spline_run(const std::vector<double>& y, double lambda,
                                               const SplitBregmanOptions& opt) {
  if (!(lambda > 0.0)) throw DomainError("split_bregman_l1_spline: lambda must be positive");
  if (!(opt.mu > 0.0) || opt.max_iter < 1) throw DomainError("split_bregman_l1_spline: bad options");
  const auto n = static_cast<Eigen::Index>(y.size());
  SplitBregmanResult res;
  res.z = y;
  if (n < 3) {
    res.objective.push_back(0.0);
    res.raw_objective.push_back(0.0);
    res.converged = true;
    return res;
  }

  // 2 lambda D'D + mu I, pentadiagonal.
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index r = 0; r + 2 < n; ++r) {
    const double c[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(r + a, r + b, 2.0 * lambda * c[a] * c[b]);
  }
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, opt.mu);
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("split_bregman_l1_spline: factorization failed");

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::VectorXd z = yv, d = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n), z_prev;
  const double shrink = 1.0 / opt.mu;
  const double scale = std::max(1.0, yv.cwiseAbs().maxCoeff());

  double best = l1_spline_objective(y, y, lambda);  // y itself is feasible
  std::vector<double> zs(y.size());
  for (int it = 1; it <= opt.max_iter; ++it) {
    z_prev = z;
    z = ldlt.solve(opt.mu * (yv + d - b));
    const Eigen::VectorXd v = z - yv + b;
    d = v.unaryExpr([shrink](double x) { return std::copysign(std::max(std::abs(x) - shrink, 0.0), x); });
    b = v - d;
    Eigen::VectorXd::Map(zs.data(), n) = z;
    const double obj = l1_spline_objective(y, zs, lambda);
    res.raw_objective.push_back(obj);
    res.iterations = it;
    if (obj <= best) {
      best = obj;
      res.z = zs;
    }
    res.objective.push_back(best);
    const double step = (z - z_prev).cwiseAbs().maxCoeff();
    const double primal = (z - yv - d).cwiseAbs().maxCoeff();
    if (step <= opt.tol * scale && primal <= opt.tol * scale) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<double> split_bregman_l1_spline(const std::vector<double>& y, double lambda,
                                            const SplitBregmanOptions& opt) {
  return split_bregman_l1_spline_run(y, lambda, opt).z;
}

// --- outlier score --------------------------------------------------------

std::vector<double> outlier_scores(const std::vector<double>& prices, const OutlierOptions& opt,
                                   bool* degenerate) {
  const std::size_t n = prices.size();
  if (n < 4) throw DomainError("outlier_scores: needs at least 4 prices");
  if (degenerate) *degenerate = false;

  std::vector<double> sorted = prices;
  std::sort(sorted.begin(), sorted.end());
  const double med_price = sorted_quantile(sorted, 0.5);
  if (!(med_price > 0.0)) throw DomainError("outlier_scores: prices must be positive");
  std::vector<double> zeta(n);
  for (std::size_t i = 0; i < n; ++i) zeta[i] = prices[i] * (opt.level / med_price);

  const std::vector<double> trend = split_bregman_l1_spline(zeta, opt.lambda_trend, opt.solver);
  std::vector<double> resid(n), logabs(n);
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = zeta[i] - trend[i];
    if (std::abs(resid[i]) <= opt.zero_residual) resid[i] = 0.0;
    logabs[i] = std::log(std::max(std::abs(resid[i]), opt.log_floor));
  }
  const std::vector<double> scale = split_bregman_l1_spline(logabs, opt.lambda_scale, opt.solver);

  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = resid[i] / std::exp(scale[i]);
  std::vector<double> s = eps;
  std::sort(s.begin(), s.end());
  const double med = sorted_quantile(s, 0.5);
  const double iqr = sorted_quantile(s, 0.75) - sorted_quantile(s, 0.25);

  std::vector<double> score(n, 0.0);
  if (!(iqr > 0.0)) {
    if (degenerate) *degenerate = true;
    return score;
  }
  for (std::size_t i = 0; i < n; ++i) score[i] = std::abs((eps[i] - med) / iqr);
  return score;
}

// --- rules ----------------------------------------------------------------

TickDay clean_day(const TickDay& day, const std::vector<Session>& sessions, const CleanConfig& cfg) {
  if (day.seconds.size() != day.prices.size()) throw DataError("clean_day: timestamps and prices differ in length");
  TickDay out = day;
  out.flags.assign(day.size(), kKept);
  out.degenerate_scores = false;

  // I
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int s = out.seconds[i];
    const bool inside = std::any_of(sessions.begin(), sessions.end(),
                                    [s](const Session& x) { return x.start <= s && s <= x.end; });
    if (!inside) out.flags[i] = kRuleSession;
  }
  // II
  for (std::size_t i : kept_indices(out)) {
    if (!(out.prices[i] > 0.0)) out.flags[i] = kRuleNonPositive;
  }
  // III
  {
    const auto k = kept_indices(out);
    std::size_t j = k.empty() ? 0 : 1;
    while (j < k.size() && out.prices[k[j]] == out.prices[k[0]]) ++j;
    for (std::size_t r = 0; r + 1 < j; ++r) out.flags[k[r]] = kRuleLeading;
  }
  // IV
  {
    const auto k = kept_indices(out);
    if (!k.empty()) {
      const double last = out.prices[k.back()];
      std::size_t j = 1;
      while (j < k.size() && out.prices[k[k.size() - 1 - j]] == last) ++j;
      for (std::size_t r = 1; r < j; ++r) out.flags[k[k.size() - 1 - r]] = kRuleTrailing;
    }
  }
  // V
  {
    const auto k = kept_indices(out);
    std::size_t start = 0;
    for (std::size_t i = 1; i <= k.size(); ++i) {
      if (i < k.size() && out.prices[k[i]] == out.prices[k[start]]) continue;
      if (i - start >= cfg.static_run) {
        for (std::size_t r = start; r + 1 < i; ++r) out.flags[k[r]] = kRuleStatic;
      }
      start = i;
    }
  }
  // VI
  {
    const auto k = kept_indices(out);
    if (k.size() >= 4) {
      std::vector<double> p(k.size());
      for (std::size_t r = 0; r < k.size(); ++r) p[r] = out.prices[k[r]];
      const auto sc = outlier_scores(p, cfg.outlier, &out.degenerate_scores);
      for (std::size_t r = 0; r < k.size(); ++r) {
        if (sc[r] > cfg.outlier_threshold) out.flags[k[r]] = kRuleOutlier;
      }
    }
  }
  // VII
  {
    const auto k = kept_indices(out);
    if (k.size() < cfg.min_obs) {
      for (std::size_t i : k) out.flags[i] = kRuleSmallDay;
    }
  }
  return out;
}

TickDay clean_day(const TickDay& day, const SessionCalendar& cal, const std::string& instrument,
                  const CleanConfig& cfg) {
  return clean_day(day, cal.sessions(instrument, day.date), cfg);
}

std::vector<double> day_returns(const std::vector<double>& prices) {
  std::vector<double> r;
  for (std::size_t i = 1; i < prices.size(); ++i) r.push_back(100.0 * (std::log(prices[i]) - std::log(prices[i - 1])));
  return r;
}

std::vector<double> day_returns(const TickDay& day) { return day_returns(day.surviving_prices()); }

// --- files ----------------------------------------------------------------

std::vector<TickDay> parse_ticks(const std::string& text, const std::string& source) {
  std::vector<TickDay> days;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(where + ": expected timestamp,price");
    const std::string ts = line.substr(0, comma), px = line.substr(comma + 1);
    if (!header) {
      header = true;
      if (ts == "timestamp") continue;
    }
    int y = 0, hh = 0, mm = 0, ss = 0;
    unsigned mo = 0, dd = 0;
    char tail = 0;
    const int got = std::sscanf(ts.c_str(), "%d-%u-%u %d:%d:%d%c", &y, &mo, &dd, &hh, &mm, &ss, &tail);
    if (got != 5 && got != 6) throw DataError(where + ": bad timestamp '" + ts + "'");
    if (got == 5) ss = 0;
    const Date date{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{dd}};
    if (!date.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59)
      throw DataError(where + ": invalid timestamp '" + ts + "'");
    char* end = nullptr;
    const double price = std::strtod(px.c_str(), &end);
    if (end == px.c_str() || *end != '\0') throw DataError(where + ": bad price '" + px + "'");
    const int sec = 3600 * hh + 60 * mm + ss;
    if (days.empty() || days.back().date != date) {
      if (!days.empty() && std::chrono::sys_days(date) < std::chrono::sys_days(days.back().date))
        throw DataError(where + ": dates out of order");
      days.emplace_back();
      days.back().date = date;
    } else if (sec <= days.back().seconds.back()) {
      throw DataError(where + ": timestamps not strictly increasing");
    }
    days.back().seconds.push_back(sec);
    days.back().prices.push_back(price);
    days.back().flags.push_back(kKept);
  }
  return days;
}

std::vector<TickDay> read_ticks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tick file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ticks(ss.str(), path.string());
}

namespace {

std::string fmt_price(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", p);
  return buf;
}

}  // namespace

std::string ticks_csv(const std::vector<TickDay>& days, bool kept_only) {
  std::string s = "timestamp,price\n";
  for (const auto& d : days) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (kept_only && d.flags[i] != kKept) continue;
      s += format_timestamp(d.date, d.seconds[i]) + "," + fmt_price(d.prices[i]) + "\n";
    }
  }
  return s;
}

std::string removal_log_csv(const std::vector<TickDay>& days) {
  std::string s = "timestamp,rule\n";
  for (const auto& d : days) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.flags[i] != kKept) s += format_timestamp(d.date, d.seconds[i]) + "," + std::to_string(d.flags[i]) + "\n";
    }
  }
  return s;
}

std::string returns_csv(const std::vector<TickDay>& days) {
  std::string s = "day_index,return\n";
  char buf[40];
  for (const auto& d : days) {
    if (d.surviving_count() == 0) continue;
    const std::string label = format_date(d.date);
    for (double r : day_returns(d)) {
      std::snprintf(buf, sizeof buf, "%.17g", r);
      s += label + "," + buf + "\n";
    }
  }
  return s;
}

CleanSummary summarize_cleaning(const std::vector<TickDay>& cleaned) {
  CleanSummary s;
  s.days = cleaned.size();
  for (const auto& d : cleaned) {
    s.obs += d.size();
    bool any = false;
    for (int f : d.flags) {
      if (f == kKept) {
        any = true;
      } else {
        ++s.removed;
        ++s.by_rule[f];
      }
    }
    if (any) ++s.days_kept;
  }
  return s;
}

}  // namespace dqf
