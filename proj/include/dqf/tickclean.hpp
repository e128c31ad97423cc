#pragma once

// Cleaning of one-minute transaction prices: session filter, static-price
// rules, L1-spline outlier score and the minimum day size.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dqf {

using Date = std::chrono::year_month_day;

/// Rule ids stored in TickDay::flags; 0 means kept.
enum Rule : int {
  kKept = 0,
  kRuleSession = 1,
  kRuleNonPositive = 2,
  kRuleLeading = 3,
  kRuleTrailing = 4,
  kRuleStatic = 5,
  kRuleOutlier = 6,
  kRuleSmallDay = 7,
};

struct TickDay {
  Date date{};
  std::vector<int> seconds;  // since local midnight, strictly increasing
  std::vector<double> prices;
  std::vector<int> flags;    // rule id per index
  bool degenerate_scores = false;  // outlier scores were all zero because the IQR vanished

  std::size_t size() const { return prices.size(); }
  std::size_t surviving_count() const;
  std::vector<double> surviving_prices() const;
  /// Copy holding the kept points only, with cleared flags.
  TickDay surviving() const;
};

struct Session {
  int start = 0;  // seconds since midnight, inclusive
  int end = 0;    // inclusive
};

struct CalendarBlock {
  Date from{};
  Date to{};
  std::vector<Session> sessions;
};

class SessionCalendar {
 public:
  /// Lines of `INSTRUMENT FROM TO HH:MM-HH:MM [HH:MM-HH:MM]`; `#` starts a comment.
  static SessionCalendar parse(const std::string& text);
  static SessionCalendar load(const std::filesystem::path& path);

  void add(const std::string& instrument, CalendarBlock block);
  /// Throws DataError if the instrument or the date is not covered.
  const std::vector<Session>& sessions(const std::string& instrument, Date date) const;
  bool covers(const std::string& instrument, Date date) const;
  std::vector<std::string> instruments() const;
  const std::vector<CalendarBlock>& blocks(const std::string& instrument) const;

 private:
  std::map<std::string, std::vector<CalendarBlock>> blocks_;
};

struct SplitBregmanOptions {
  double mu = 10.0;
  int max_iter = 2000;
  double tol = 1e-10;  // on the step and the splitting residual, relative to max |y|
};

struct SplitBregmanResult {
  std::vector<double> z;
  std::vector<double> objective;  // of the retained iterate, per outer iteration
  std::vector<double> raw_objective;  // of the plain iterate
  int iterations = 0;
  bool converged = false;
};

/// Interior second differences (Dz)_i = z_i - 2 z_{i+1} + z_{i+2}.
double l1_spline_objective(const std::vector<double>& y, const std::vector<double>& z, double lambda);

/// argmin_z ||z - y||_1 + lambda ||D z||_2^2 by split Bregman. An iterate is
/// retained only if it does not raise the objective, so `objective` is
/// non-increasing; the Bregman state itself is never reset.
SplitBregmanResult split_bregman_l1_spline_run(const std::vector<double>& y, double lambda,
                                               const SplitBregmanOptions& opt = {});
std::vector<double> split_bregman_l1_spline(const std::vector<double>& y, double lambda,
                                            const SplitBregmanOptions& opt = {});

struct OutlierOptions {
  double lambda_trend = 50.0;
  double lambda_scale = 50000.0;
  double level = 1000.0;       // prices are rescaled so that their median equals this
  double zero_residual = 1e-5;  // |residual| at or below this (rescaled units) counts as 0
  double log_floor = 1e-12;
  SplitBregmanOptions solver{};
};

/// Scale-invariant outlier score per price; needs at least 4 prices.
/// `degenerate` is set when the IQR of the standardized residuals is 0.
std::vector<double> outlier_scores(const std::vector<double>& prices, const OutlierOptions& opt = {},
                                   bool* degenerate = nullptr);

struct CleanConfig {
  double outlier_threshold = 20.0;
  std::size_t min_obs = 60;
  std::size_t static_run = 31;  // runs of at least this length lose all but the last point
  OutlierOptions outlier{};
};

/// Applies rules I to VII in order; only kept points are seen by later rules.
TickDay clean_day(const TickDay& day, const std::vector<Session>& sessions, const CleanConfig& cfg = {});
TickDay clean_day(const TickDay& day, const SessionCalendar& cal, const std::string& instrument,
                  const CleanConfig& cfg = {});

/// 100 (log p_{i+1} - log p_i) over the kept prices.
std::vector<double> day_returns(const TickDay& day);
std::vector<double> day_returns(const std::vector<double>& prices);

// --- files ---------------------------------------------------------------

Date parse_date(const std::string& s);
std::string format_date(Date d);
std::string format_timestamp(Date d, int seconds);

/// `timestamp,price` with timestamps `YYYY-MM-DD HH:MM[:SS]`, grouped into days.
std::vector<TickDay> parse_ticks(const std::string& text, const std::string& source = "<memory>");
std::vector<TickDay> read_ticks(const std::filesystem::path& path);

std::string ticks_csv(const std::vector<TickDay>& days, bool kept_only);
/// `timestamp,rule` for every removed point.
std::string removal_log_csv(const std::vector<TickDay>& days);
/// `day_index,return` for days that survived.
std::string returns_csv(const std::vector<TickDay>& days);

struct CleanSummary {
  std::size_t days = 0;        // trading days before cleaning
  std::size_t obs = 0;         // observations before cleaning
  std::size_t removed = 0;
  std::size_t days_kept = 0;
  std::map<int, std::size_t> by_rule;
  double deleted_pct() const { return obs ? 100.0 * static_cast<double>(removed) / static_cast<double>(obs) : 0.0; }
};

CleanSummary summarize_cleaning(const std::vector<TickDay>& cleaned);

}  // namespace dqf
