// Reader for the subset of XES needed here: traces with `concept:name`, events with
// `concept:name`, `lifecycle:transition` and `time:timestamp`. Everything else is skipped.

#include "qlbn/error.hpp"
#include "qlbn/eventlog.hpp"

#include <istream>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qlbn::eventlog {

namespace {

struct Tag {
    enum class Kind { open, close, empty } kind;
    std::string_view name;
    std::vector<std::pair<std::string_view, std::string>> attrs;
};

class XmlScanner {
public:
    explicit XmlScanner(std::string_view doc) : doc_(doc) {}

    // Next element tag; text, comments, processing instructions and declarations are skipped.
    std::optional<Tag> next() {
        for (;;) {
            std::size_t lt = doc_.find('<', pos_);
            if (lt == std::string_view::npos) {
                pos_ = doc_.size();
                return std::nullopt;
            }
            pos_ = lt;
            if (starts("<!--")) {
                skip_past("-->");
            } else if (starts("<![CDATA[")) {
                skip_past("]]>");
            } else if (starts("<?")) {
                skip_past("?>");
            } else if (starts("<!")) {
                skip_past(">");
            } else {
                return read_tag();
            }
        }
    }

    std::size_t offset() const noexcept { return pos_; }

private:
    bool starts(std::string_view s) const noexcept { return doc_.substr(pos_, s.size()) == s; }

    void skip_past(std::string_view terminator) {
        std::size_t end = doc_.find(terminator, pos_);
        if (end == std::string_view::npos)
            fail("unterminated markup");
        pos_ = end + terminator.size();
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(Errc::xml_syntax, what + " at byte " + std::to_string(pos_));
    }

    static bool is_space(char c) noexcept { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
    static bool is_name_char(char c) noexcept {
        return !is_space(c) && c != '/' && c != '>' && c != '=' && c != '<' && c != '"' && c != '\'';
    }

    void skip_space() {
        while (pos_ < doc_.size() && is_space(doc_[pos_]))
            ++pos_;
    }

    std::string_view read_name() {
        std::size_t start = pos_;
        while (pos_ < doc_.size() && is_name_char(doc_[pos_]))
            ++pos_;
        if (pos_ == start)
            fail("expected name");
        return doc_.substr(start, pos_ - start);
    }

    std::string decode(std::string_view raw) const {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out += raw[i];
                continue;
            }
            std::size_t semi = raw.find(';', i);
            if (semi == std::string_view::npos)
                fail("unterminated entity");
            std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else if (ent.starts_with("#")) {
                unsigned long cp = 0;
                try {
                    cp = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')
                             ? std::stoul(std::string{ent.substr(2)}, nullptr, 16)
                             : std::stoul(std::string{ent.substr(1)}, nullptr, 10);
                } catch (const std::exception&) {
                    fail("bad character reference");
                }
                append_utf8(out, cp);
            } else {
                fail("unknown entity &" + std::string{ent} + ";");
            }
            i = semi;
        }
        return out;
    }

    static void append_utf8(std::string& out, unsigned long cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    Tag read_tag() {
        ++pos_;  // '<'
        Tag tag{Tag::Kind::open, {}, {}};
        if (pos_ < doc_.size() && doc_[pos_] == '/') {
            ++pos_;
            tag.kind = Tag::Kind::close;
            tag.name = read_name();
            skip_space();
            if (pos_ >= doc_.size() || doc_[pos_] != '>')
                fail("expected '>'");
            ++pos_;
            return tag;
        }
        tag.name = read_name();
        for (;;) {
            skip_space();
            if (pos_ >= doc_.size())
                fail("unterminated tag");
            char c = doc_[pos_];
            if (c == '>') {
                ++pos_;
                return tag;
            }
            if (c == '/') {
                if (pos_ + 1 >= doc_.size() || doc_[pos_ + 1] != '>')
                    fail("expected '/>'");
                pos_ += 2;
                tag.kind = Tag::Kind::empty;
                return tag;
            }
            std::string_view key = read_name();
            skip_space();
            if (pos_ >= doc_.size() || doc_[pos_] != '=')
                fail("expected '=' after attribute " + std::string{key});
            ++pos_;
            skip_space();
            if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\''))
                fail("expected quoted attribute value");
            char quote = doc_[pos_++];
            std::size_t end = doc_.find(quote, pos_);
            if (end == std::string_view::npos)
                fail("unterminated attribute value");
            tag.attrs.emplace_back(key, decode(doc_.substr(pos_, end - pos_)));
            pos_ = end + 1;
        }
    }

    std::string_view doc_;
    std::size_t pos_ = 0;
};

bool is_attribute_element(std::string_view name) noexcept {
    return name == "string" || name == "date" || name == "int" || name == "float" || name == "boolean" ||
           name == "id";
}

const std::string* find_attr(const Tag& tag, std::string_view key) {
    for (const auto& [k, v] : tag.attrs)
        if (k == key)
            return &v;
    return nullptr;
}

struct PendingEvent {
    std::optional<std::string> name;
    std::optional<std::string> lifecycle;
    std::optional<std::string> timestamp;
};

}  // namespace

EventLog parse_xes(std::istream& in) {
    std::string doc{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    XmlScanner scanner(doc);

    std::vector<std::string_view> stack;
    std::vector<EventRecord> records;
    std::optional<std::string> trace_name;
    std::vector<EventRecord> trace_events;
    std::set<std::string> case_ids;
    PendingEvent event;
    std::size_t event_index = 0;  // global, zero-based
    std::size_t trace_index = 0;
    bool seen_root = false;

    auto parent_is = [&](std::string_view name) { return !stack.empty() && stack.back() == name; };

    auto finish_event = [&] {
        if (!event.name)
            throw Error(Errc::missing_required_attribute, "event lacks concept:name", event_index);
        if (!event.timestamp)
            throw Error(Errc::missing_required_attribute, "event lacks time:timestamp", event_index);
        EventRecord r;
        r.activity = *event.name;
        if (r.activity.empty())
            throw Error(Errc::missing_required_attribute, "event has empty concept:name", event_index);
        auto ts = parse_timestamp(*event.timestamp);
        if (!ts)
            throw Error(Errc::malformed_row, "bad time:timestamp '" + *event.timestamp + "'", event_index);
        r.timestamp = *ts;
        // Transitions outside START/SCHEDULE/COMPLETE carry no meaning downstream.
        r.lifecycle = event.lifecycle ? parse_lifecycle(*event.lifecycle).value_or(Lifecycle::none) : Lifecycle::none;
        trace_events.push_back(std::move(r));
        ++event_index;
        event = {};
    };

    auto finish_trace = [&] {
        if (!trace_name || trace_name->empty())
            throw Error(Errc::missing_required_attribute, "trace " + std::to_string(trace_index) + " lacks concept:name",
                        event_index);
        case_ids.insert(*trace_name);
        for (auto& r : trace_events) {
            r.case_id = *trace_name;
            records.push_back(std::move(r));
        }
        trace_events.clear();
        trace_name.reset();
        ++trace_index;
    };

    while (auto tag = scanner.next()) {
        if (tag->kind == Tag::Kind::close) {
            if (stack.empty() || stack.back() != tag->name)
                throw Error(Errc::xml_syntax, "mismatched </" + std::string{tag->name} + "> at byte " +
                                                  std::to_string(scanner.offset()));
            if (tag->name == "event" && stack.size() >= 2 && stack[stack.size() - 2] == "trace")
                finish_event();
            else if (tag->name == "trace" && stack.size() >= 2 && stack[stack.size() - 2] == "log")
                finish_trace();
            stack.pop_back();
            continue;
        }

        if (stack.empty()) {
            if (seen_root)
                throw Error(Errc::xml_syntax, "multiple root elements");
            seen_root = true;
        }

        if (is_attribute_element(tag->name)) {
            const std::string* key = find_attr(*tag, "key");
            const std::string* value = find_attr(*tag, "value");
            if (key && value) {
                bool in_event = parent_is("event") && stack.size() >= 2 && stack[stack.size() - 2] == "trace";
                bool in_trace = parent_is("trace") && stack.size() >= 2 && stack[stack.size() - 2] == "log";
                if (in_event) {
                    if (*key == "concept:name") event.name = *value;
                    else if (*key == "lifecycle:transition") event.lifecycle = *value;
                    else if (*key == "time:timestamp") event.timestamp = *value;
                } else if (in_trace && *key == "concept:name") {
                    trace_name = *value;
                }
            }
        }

        if (tag->kind == Tag::Kind::empty) {
            // `<event/>` carries no attributes, so it is always incomplete.
            if (tag->name == "event" && parent_is("trace"))
                finish_event();
            else if (tag->name == "trace" && parent_is("log"))
                finish_trace();
            continue;
        }
        stack.push_back(tag->name);
    }
    if (!stack.empty())
        throw Error(Errc::xml_syntax, "unclosed <" + std::string{stack.back()} + ">");
    if (!seen_root)
        throw Error(Errc::xml_syntax, "no root element");
    if (records.empty())
        throw Error(Errc::empty_log, "XES contains no events");
    return EventLog::from_records(std::move(records), {}, case_ids);
}

}  // namespace qlbn::eventlog
