#include "qlbn/eventlog.hpp"

#include "qlbn/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

namespace qlbn::eventlog {

namespace {

bool iequals(std::string_view a, std::string_view b) noexcept {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
           });
}

template <typename Int>
bool parse_digits(std::string_view s, std::size_t pos, std::size_t len, Int& out) noexcept {
    if (pos + len > s.size())
        return false;
    for (std::size_t i = pos; i < pos + len; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            return false;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc{};
}

bool is_worker_task(std::string_view activity) noexcept { return activity.starts_with("W_"); }

}  // namespace

std::string_view to_string(Lifecycle lc) noexcept {
    switch (lc) {
    case Lifecycle::start: return "START";
    case Lifecycle::schedule: return "SCHEDULE";
    case Lifecycle::complete: return "COMPLETE";
    case Lifecycle::none: return "NONE";
    }
    return "NONE";
}

std::optional<Lifecycle> parse_lifecycle(std::string_view text) noexcept {
    for (auto lc : {Lifecycle::start, Lifecycle::schedule, Lifecycle::complete, Lifecycle::none})
        if (iequals(text, to_string(lc)))
            return lc;
    return std::nullopt;
}

std::optional<Timestamp> parse_timestamp(std::string_view s) noexcept {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
    if (!parse_digits(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !parse_digits(s, 5, 2, mo) || s[7] != '-' ||
        !parse_digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') || !parse_digits(s, 11, 2, h) || s[13] != ':' ||
        !parse_digits(s, 14, 2, mi) || s[16] != ':' || !parse_digits(s, 17, 2, se))
        return std::nullopt;
    if (h > 23 || mi > 59 || se > 60)
        return std::nullopt;
    year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok())
        return std::nullopt;

    std::size_t pos = 19;
    long long millis = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            if (digits < 3)
                millis = millis * 10 + (s[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0)
            return std::nullopt;
        for (std::size_t k = digits; k < 3; ++k)
            millis *= 10;
    }

    long long offset_minutes = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' || s[pos] == 'z') {
            ++pos;
        } else if (s[pos] == '+' || s[pos] == '-') {
            int sign = s[pos] == '-' ? -1 : 1;
            unsigned oh = 0, om = 0;
            if (!parse_digits(s, pos + 1, 2, oh))
                return std::nullopt;
            pos += 3;
            if (pos < s.size() && s[pos] == ':')
                ++pos;
            if (!parse_digits(s, pos, 2, om))
                return std::nullopt;
            pos += 2;
            if (oh > 23 || om > 59)
                return std::nullopt;
            offset_minutes = sign * static_cast<long long>(oh * 60 + om);
        } else {
            return std::nullopt;
        }
    }
    if (pos != s.size())
        return std::nullopt;

    auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{se} + milliseconds{millis} - minutes{offset_minutes};
    return time_point_cast<milliseconds>(tp);
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    auto day_point = floor<days>(ts);
    year_month_day ymd{day_point};
    auto ms = (ts - day_point).count();
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(ms / 3'600'000), static_cast<long long>(ms / 60'000 % 60),
                  static_cast<long long>(ms / 1000 % 60), static_cast<long long>(ms % 1000));
    return buf;
}

EventLog EventLog::from_records(std::vector<EventRecord> records, const std::set<std::string>& extra_activities,
                                const std::set<std::string>& extra_cases) {
    EventLog log;
    log.universe_ = extra_activities;
    for (const auto& c : extra_cases)
        log.cases_[c];
    log.event_count_ = records.size();
    for (auto& r : records) {
        log.universe_.insert(r.activity);
        log.cases_[r.case_id].push_back(std::move(r));
    }
    for (auto& [id, seq] : log.cases_)
        std::stable_sort(seq.begin(), seq.end(),
                         [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
    return log;
}

std::vector<EventRecord> EventLog::records() const {
    std::vector<EventRecord> out;
    out.reserve(event_count_);
    for (const auto& [id, seq] : cases_)
        out.insert(out.end(), seq.begin(), seq.end());
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view csv_header = "case_id,activity,lifecycle,timestamp";

// Splits one CSV record starting at the stream's current position. Quoted fields may span lines;
// `line` is advanced by the number of physical lines consumed.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
    fields.clear();
    std::string field;
    bool in_quotes = false, any = false, was_quoted = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty() && !was_quoted) {
            in_quotes = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else if (c == '\n') {
            ++line;
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n')
                continue;
            field += c;
        } else {
            field += c;
        }
    }
    if (!any)
        return false;
    fields.push_back(std::move(field));
    return true;
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string{s};
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

EventLog parse_csv(std::istream& in) {
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (in.peek() == 0xEF) {  // UTF-8 BOM
        char bom[3];
        in.read(bom, 3);
    }
    std::size_t record_line = line + 1;
    if (!read_csv_record(in, fields, line))
        throw Error(Errc::empty_log, "no header");
    if (fields.size() != 4 || fields[0] != "case_id" || fields[1] != "activity" || fields[2] != "lifecycle" ||
        fields[3] != "timestamp")
        throw Error(Errc::malformed_row, "expected header '" + std::string{csv_header} + "'", record_line);

    std::vector<EventRecord> records;
    for (;;) {
        record_line = line + 1;
        if (!read_csv_record(in, fields, line))
            break;
        if (fields.size() == 1 && fields[0].empty())
            continue;  // blank line
        if (fields.size() != 4)
            throw Error(Errc::malformed_row, "expected 4 fields, got " + std::to_string(fields.size()), record_line);
        EventRecord r;
        r.case_id = std::move(fields[0]);
        r.activity = std::move(fields[1]);
        if (r.case_id.empty())
            throw Error(Errc::malformed_row, "empty case_id", record_line);
        if (r.activity.empty())
            throw Error(Errc::malformed_row, "empty activity", record_line);
        if (fields[2].empty()) {
            r.lifecycle = Lifecycle::none;
        } else if (auto lc = parse_lifecycle(fields[2])) {
            r.lifecycle = *lc;
        } else {
            throw Error(Errc::malformed_row, "unknown lifecycle '" + fields[2] + "'", record_line);
        }
        auto ts = parse_timestamp(fields[3]);
        if (!ts)
            throw Error(Errc::malformed_row, "bad timestamp '" + fields[3] + "'", record_line);
        r.timestamp = *ts;
        records.push_back(std::move(r));
    }
    if (records.empty())
        throw Error(Errc::empty_log, "no event rows");
    return EventLog::from_records(std::move(records));
}

void write_csv(std::ostream& out, const EventLog& log) {
    out << csv_header << '\n';
    for (const auto& [id, seq] : log.cases())
        for (const auto& r : seq)
            out << csv_escape(r.case_id) << ',' << csv_escape(r.activity) << ',' << to_string(r.lifecycle) << ','
                << format_timestamp(r.timestamp) << '\n';
}

// ---------------------------------------------------------------------------

EventLog read_log(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    bool gz = name.ends_with(".gz");
    if (gz)
        name.resize(name.size() - 3);
    bool xes = name.ends_with(".xes");
    if (!xes && !name.ends_with(".csv"))
        throw Error(Errc::invalid_argument, "unsupported log extension: " + path.string());

    if (!gz) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error(Errc::io, "cannot open " + path.string());
        return xes ? parse_xes(in) : parse_csv(in);
    }

    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f)
        throw Error(Errc::io, "cannot open " + path.string());
    std::string data;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0)
        data.append(buf, static_cast<std::size_t>(n));
    bool failed = n < 0;
    gzclose(f);
    if (failed)
        throw Error(Errc::io, "gzip decode failed: " + path.string());
    std::istringstream in(std::move(data));
    return xes ? parse_xes(in) : parse_csv(in);
}

EventLog filter_lifecycle(const EventLog& log, const LifecycleFilter& keep) {
    std::vector<EventRecord> kept;
    std::set<std::string> case_ids;
    for (const auto& [id, seq] : log.cases()) {
        case_ids.insert(id);
        for (const auto& r : seq)
            if (!is_worker_task(r.activity) || keep.contains(r.lifecycle))
                kept.push_back(r);
    }
    return EventLog::from_records(std::move(kept), log.activity_universe(), case_ids);
}

EventLog rename_activities(const EventLog& log, const std::map<std::string, std::string>& aliases) {
    auto rename = [&](const std::string& a) {
        auto it = aliases.find(a);
        return it == aliases.end() ? a : it->second;
    };
    std::vector<EventRecord> out;
    std::set<std::string> universe, case_ids;
    for (const auto& a : log.activity_universe())
        universe.insert(rename(a));
    for (const auto& [id, seq] : log.cases()) {
        case_ids.insert(id);
        for (auto r : seq) {
            r.activity = rename(r.activity);
            out.push_back(std::move(r));
        }
    }
    return EventLog::from_records(std::move(out), universe, case_ids);
}

ActivityStats activity_stats(const EventLog& log, const std::optional<LifecycleFilter>& filter) {
    if (log.empty())
        throw Error(Errc::empty_log, "activity_stats on empty log");
    ActivityStats stats;
    for (const auto& a : log.activity_universe())
        stats.counts[a] = 0;
    for (const auto& [id, seq] : log.cases())
        for (const auto& r : seq) {
            if (filter && is_worker_task(r.activity) && !filter->contains(r.lifecycle))
                continue;
            ++stats.counts[r.activity];
            ++stats.total;
        }
    return stats;
}

std::string stats_to_json(const ActivityStats& stats) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, count] : stats.counts)  // std::map keeps names sorted
        j[name] = count;
    return j.dump(2);
}

// ---------------------------------------------------------------------------

CaseMatrix::CaseMatrix(std::vector<std::string> variables, std::vector<std::string> case_ids, std::vector<Cell> cells)
    : variables_(std::move(variables)), case_ids_(std::move(case_ids)), cells_(std::move(cells)) {
    if (cells_.size() != variables_.size() * case_ids_.size())
        throw Error(Errc::invalid_argument, "case matrix cell count does not match rows x variables");
}

std::size_t CaseMatrix::missing_count() const noexcept {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), Cell::missing));
}

std::optional<std::size_t> CaseMatrix::index_of(std::string_view variable) const noexcept {
    auto it = std::find(variables_.begin(), variables_.end(), variable);
    if (it == variables_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - variables_.begin());
}

CaseMatrix to_case_matrix(const EventLog& log, const std::vector<std::string>& variables) {
    std::map<std::string_view, std::size_t> column;
    for (std::size_t j = 0; j < variables.size(); ++j) {
        if (!log.activity_universe().contains(variables[j]))
            throw Error(Errc::unknown_variable, variables[j]);
        column.emplace(variables[j], j);
    }
    std::vector<std::string> ids;
    std::vector<Cell> cells;
    ids.reserve(log.case_count());
    cells.reserve(log.case_count() * variables.size());
    for (const auto& [id, seq] : log.cases()) {
        ids.push_back(id);
        std::size_t base = cells.size();
        cells.resize(base + variables.size(), Cell::absent);
        for (const auto& r : seq)
            if (auto it = column.find(r.activity); it != column.end())
                cells[base + it->second] = Cell::present;
    }
    return CaseMatrix(variables, std::move(ids), std::move(cells));
}

}  // namespace qlbn::eventlog
