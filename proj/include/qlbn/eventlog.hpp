#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qlbn::eventlog {

enum class Lifecycle : std::uint8_t { start, schedule, complete, none };

std::string_view to_string(Lifecycle lc) noexcept;

// Case-insensitive; accepts START, SCHEDULE, COMPLETE, NONE.
std::optional<Lifecycle> parse_lifecycle(std::string_view text) noexcept;

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// ISO-8601 `YYYY-MM-DDTHH:MM:SS[.fff...][Z|+HH:MM|-HH:MM|+HHMM]`; no zone means UTC.
// Sub-millisecond digits are truncated.
std::optional<Timestamp> parse_timestamp(std::string_view text) noexcept;

// Canonical UTC form `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string format_timestamp(Timestamp ts);

struct EventRecord {
    std::string case_id;
    std::string activity;
    Lifecycle lifecycle = Lifecycle::none;
    Timestamp timestamp{};

    bool operator==(const EventRecord&) const = default;
};

using LifecycleFilter = std::set<Lifecycle>;

// Events grouped per case, each case stable-sorted by timestamp (ties keep source order).
class EventLog {
public:
    EventLog() = default;

    // `extra_activities` and `extra_cases` are kept even if no record names them; this is how
    // filtered logs remember activities and cases whose every event was dropped.
    static EventLog from_records(std::vector<EventRecord> records,
                                 const std::set<std::string>& extra_activities = {},
                                 const std::set<std::string>& extra_cases = {});

    const std::map<std::string, std::vector<EventRecord>>& cases() const noexcept { return cases_; }
    const std::set<std::string>& activity_universe() const noexcept { return universe_; }
    std::size_t event_count() const noexcept { return event_count_; }
    std::size_t case_count() const noexcept { return cases_.size(); }
    bool empty() const noexcept { return event_count_ == 0; }

    // Records in case order, then time order.
    std::vector<EventRecord> records() const;

    bool operator==(const EventLog&) const = default;

private:
    std::map<std::string, std::vector<EventRecord>> cases_;
    std::set<std::string> universe_;
    std::size_t event_count_ = 0;
};

EventLog parse_csv(std::istream& in);
void write_csv(std::ostream& out, const EventLog& log);

EventLog parse_xes(std::istream& in);

// Dispatches on extension: `.csv`, `.xes`, optionally followed by `.gz`.
EventLog read_log(const std::filesystem::path& path);

// Drops `W_` events whose lifecycle is not in `keep`. `A_`/`O_` events are always kept.
// The activity universe and the case set are preserved.
EventLog filter_lifecycle(const EventLog& log, const LifecycleFilter& keep);

// Renames activities; names absent from `aliases` pass through unchanged.
EventLog rename_activities(const EventLog& log, const std::map<std::string, std::string>& aliases);

struct ActivityStats {
    std::map<std::string, std::uint64_t> counts;  // every activity in the universe, zeros included
    std::uint64_t total = 0;                       // retained events

    bool operator==(const ActivityStats&) const = default;
};

ActivityStats activity_stats(const EventLog& log, const std::optional<LifecycleFilter>& filter = std::nullopt);

// `{activity: count}` with keys sorted by activity name.
std::string stats_to_json(const ActivityStats& stats);

enum class Cell : std::uint8_t { present, absent, missing };

class CaseMatrix {
public:
    CaseMatrix() = default;
    CaseMatrix(std::vector<std::string> variables, std::vector<std::string> case_ids, std::vector<Cell> cells);

    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::vector<std::string>& case_ids() const noexcept { return case_ids_; }
    std::size_t rows() const noexcept { return case_ids_.size(); }
    std::size_t cols() const noexcept { return variables_.size(); }
    std::size_t cells() const noexcept { return cells_.size(); }

    Cell at(std::size_t row, std::size_t col) const { return cells_[row * cols() + col]; }
    void set(std::size_t row, std::size_t col, Cell c) { cells_[row * cols() + col] = c; }
    std::span<const Cell> row(std::size_t r) const { return {cells_.data() + r * cols(), cols()}; }
    std::span<const Cell> flat() const noexcept { return cells_; }
    std::span<Cell> flat() noexcept { return cells_; }

    std::size_t missing_count() const noexcept;
    std::optional<std::size_t> index_of(std::string_view variable) const noexcept;

    bool operator==(const CaseMatrix&) const = default;

private:
    std::vector<std::string> variables_;
    std::vector<std::string> case_ids_;
    std::vector<Cell> cells_;
};

// One row per case; a cell is present iff the case has at least one event of that activity.
CaseMatrix to_case_matrix(const EventLog& log, const std::vector<std::string>& variables);

}  // namespace qlbn::eventlog
