#include "chapterkit/segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>
#include <sstream>

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/text.hpp"

namespace chapterkit {

SegmentLabel SegmentLabel::chapter(int i) {
    if (i < 1) throw ValidationError("chapter index must be >= 1");
    return {SegmentKind::kChapter, i};
}

SegmentLabel SegmentLabel::parse(std::string_view s) {
    std::string key = canonical_key(s);
    if (key == "front") return front();
    if (key == "references") return references();
    if (key == "appendix") return appendix();
    if (starts_with_icase(key, "chapter")) {
        std::string_view num = std::string_view(key).substr(7);
        int i = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), i);
        if (ec == std::errc() && ptr == num.data() + num.size() && i >= 1) return chapter(i);
    }
    throw ParseError("unknown segment label \"" + std::string(s) + "\"");
}

std::string SegmentLabel::to_string() const {
    switch (kind) {
        case SegmentKind::kFront: return "front";
        case SegmentKind::kChapter: return "chapter" + std::to_string(chapter_index);
        case SegmentKind::kReferences: return "references";
        case SegmentKind::kAppendix: return "appendix";
    }
    return "?";
}

// --- manifest validation ------------------------------------------------------

void SegmentManifest::validate(int page_count) const {
    std::string who = doc_id.empty() ? std::string("manifest") : "manifest for " + doc_id;
    if (page_count < 1) throw ValidationError(who + ": page_count must be >= 1");
    if (entries.empty()) throw ValidationError(who + ": no entries");

    for (const ManifestEntry& e : entries) {
        if (e.page_start < 1 || e.page_end < e.page_start || e.page_end > page_count) {
            throw ValidationError(who + ": entry " + e.label.to_string() + " range " +
                                  std::to_string(e.page_start) + ".." +
                                  std::to_string(e.page_end) + " invalid for " +
                                  std::to_string(page_count) + " pages");
        }
    }

    // Label sequence: front, chapter1..chapterN, [references], [appendix].
    if (entries.front().label.kind != SegmentKind::kFront) {
        throw ValidationError(who + ": first entry must be front");
    }
    int next_chapter = 1;
    enum Phase { kInFront, kInChapters, kAfterReferences, kAfterAppendix } phase = kInFront;
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const SegmentLabel& label = entries[i].label;
        switch (label.kind) {
            case SegmentKind::kFront:
                throw ValidationError(who + ": multiple front entries");
            case SegmentKind::kChapter:
                if (phase == kAfterReferences || phase == kAfterAppendix) {
                    throw ValidationError(who + ": chapter after references/appendix");
                }
                if (label.chapter_index != next_chapter) {
                    throw ValidationError(who + ": expected chapter" +
                                          std::to_string(next_chapter) + ", got " +
                                          label.to_string());
                }
                ++next_chapter;
                phase = kInChapters;
                break;
            case SegmentKind::kReferences:
                if (phase == kAfterReferences || phase == kAfterAppendix) {
                    throw ValidationError(who + ": references out of order or duplicated");
                }
                phase = kAfterReferences;
                break;
            case SegmentKind::kAppendix:
                if (phase == kAfterAppendix) {
                    throw ValidationError(who + ": multiple appendix entries");
                }
                phase = kAfterAppendix;
                break;
        }
    }

    // Coverage: entries must partition 1..page_count in listed order.
    int expected = 1;
    for (const ManifestEntry& e : entries) {
        if (e.page_start > expected) {
            throw ValidationError(who + ": gap, pages " + std::to_string(expected) + ".." +
                                  std::to_string(e.page_start - 1) + " uncovered");
        }
        if (e.page_start < expected) {
            throw ValidationError(who + ": overlap, pages " + std::to_string(e.page_start) +
                                  ".." + std::to_string(std::min(expected - 1, e.page_end)) +
                                  " covered twice");
        }
        expected = e.page_end + 1;
    }
    if (expected != page_count + 1) {
        throw ValidationError(who + ": gap, pages " + std::to_string(expected) + ".." +
                              std::to_string(page_count) + " uncovered");
    }
}

// --- detection ------------------------------------------------------------------

namespace {

constexpr std::size_t kHeadingWindow = 5;

std::vector<std::string> heading_window(const std::string& page_text) {
    std::vector<std::string> window;
    for (const std::string& raw : split_lines(page_text)) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        window.push_back(line);
        if (window.size() == kHeadingWindow + 1) break;  // +1: the two-line rule peeks ahead
    }
    return window;
}

std::optional<int> roman_to_int(std::string_view s) {
    static const std::pair<char, int> values[] = {{'i', 1},   {'v', 5},   {'x', 10},  {'l', 50},
                                                  {'c', 100}, {'d', 500}, {'m', 1000}};
    auto value_of = [&](char c) -> int {
        for (auto [ch, v] : values) {
            if (std::tolower(static_cast<unsigned char>(c)) == ch) return v;
        }
        return 0;
    };
    if (s.empty()) return std::nullopt;
    int total = 0;
    int prev = 0;
    for (std::size_t i = s.size(); i-- > 0;) {
        int v = value_of(s[i]);
        if (v == 0) return std::nullopt;
        if (v < prev) {
            total -= v;
        } else {
            total += v;
            prev = v;
        }
    }
    if (total < 1) return std::nullopt;
    return total;
}

bool is_title_case_line(const std::string& line) {
    // First letter uppercase plus at least one lowercase letter somewhere.
    auto it = std::find_if(line.begin(), line.end(), [](unsigned char c) {
        return std::isalpha(c) != 0;
    });
    if (it == line.end() || !std::isupper(static_cast<unsigned char>(*it))) return false;
    return std::any_of(line.begin(), line.end(), [](unsigned char c) {
        return std::islower(c) != 0;
    });
}

bool matches_chapter_keyword(const std::string& line) {
    static const std::regex re(R"(^chapter\s+([0-9]{1,3}|[ivxlcdm]+)\b.*)",
                               std::regex::icase | std::regex::optimize);
    std::smatch m;
    if (!std::regex_match(line, m, re)) return false;
    std::string token = to_lower_ascii(m[1].str());
    if (std::isdigit(static_cast<unsigned char>(token[0]))) return true;
    return roman_to_int(token).has_value();
}

bool matches_numbered_title(const std::string& line) {
    // "2. Methods" / "2 Methods": 1-2 digit number, optional dot, then a
    // title-case word on the same line.
    static const std::regex re(R"(^([0-9]{1,2})\.?\s+(\S.*)$)", std::regex::optimize);
    std::smatch m;
    if (!std::regex_match(line, m, re)) return false;
    return is_title_case_line(m[2].str());
}

bool is_bare_number(const std::string& line) {
    static const std::regex re(R"(^[0-9]{1,2}\.?$)", std::regex::optimize);
    return std::regex_match(line, re);
}

bool page_starts_chapter(const std::string& page_text) {
    auto window = heading_window(page_text);
    std::size_t n = std::min(window.size(), kHeadingWindow);
    for (std::size_t i = 0; i < n; ++i) {
        if (matches_chapter_keyword(window[i])) return true;
        if (matches_numbered_title(window[i])) return true;
        if (is_bare_number(window[i]) && i + 1 < window.size() &&
            is_title_case_line(window[i + 1])) {
            return true;
        }
    }
    return false;
}

bool page_starts_heading(const std::string& page_text, bool (*line_matches)(const std::string&)) {
    auto window = heading_window(page_text);
    std::size_t n = std::min(window.size(), kHeadingWindow);
    for (std::size_t i = 0; i < n; ++i) {
        if (line_matches(window[i])) return true;
    }
    return false;
}

bool is_references_heading(const std::string& line) {
    std::string key = canonical_key(line);
    return key == "references" || key == "bibliography";
}

bool is_appendix_heading(const std::string& line) {
    return starts_with_icase(canonical_key(line), "appendix");
}

}  // namespace

std::vector<int> detect_chapter_starts(const std::vector<std::string>& pages) {
    if (pages.empty()) throw ValidationError("detect_chapter_starts: no pages");
    std::vector<int> starts;
    for (std::size_t p = 1; p < pages.size(); ++p) {  // page 1 is never a chapter start
        if (page_starts_chapter(pages[p])) starts.push_back(static_cast<int>(p + 1));
    }
    return starts;
}

std::optional<int> detect_references_start(const std::vector<std::string>& pages) {
    for (std::size_t p = 1; p < pages.size(); ++p) {
        if (page_starts_heading(pages[p], is_references_heading)) return static_cast<int>(p + 1);
    }
    return std::nullopt;
}

std::optional<int> detect_appendix_start(const std::vector<std::string>& pages) {
    for (std::size_t p = 1; p < pages.size(); ++p) {
        if (page_starts_heading(pages[p], is_appendix_heading)) return static_cast<int>(p + 1);
    }
    return std::nullopt;
}

SegmentManifest segments_from_detection(const std::vector<int>& starts, int page_count,
                                        std::optional<int> refs_start,
                                        std::optional<int> appendix_start, std::string doc_id) {
    if (page_count < 1) throw ValidationError("segments_from_detection: page_count must be >= 1");

    auto check_boundary = [&](int b, const char* what) {
        if (b <= 1 || b > page_count) {
            throw ValidationError(std::string("segments_from_detection: ") + what + " page " +
                                  std::to_string(b) + " out of range (1," +
                                  std::to_string(page_count) + "]");
        }
    };
    for (std::size_t i = 0; i < starts.size(); ++i) {
        check_boundary(starts[i], "chapter start");
        if (i > 0 && starts[i] <= starts[i - 1]) {
            throw ValidationError("segments_from_detection: chapter starts not ascending");
        }
    }
    int last_chapter = starts.empty() ? 1 : starts.back();
    if (refs_start) {
        check_boundary(*refs_start, "references start");
        if (*refs_start <= last_chapter) {
            throw ValidationError("segments_from_detection: references overlap a chapter");
        }
    }
    if (appendix_start) {
        check_boundary(*appendix_start, "appendix start");
        if (*appendix_start <= last_chapter ||
            (refs_start && *appendix_start <= *refs_start)) {
            throw ValidationError("segments_from_detection: appendix boundary out of order");
        }
    }

    SegmentManifest m;
    m.doc_id = std::move(doc_id);
    int tail_start = page_count + 1;
    if (appendix_start) tail_start = *appendix_start;
    if (refs_start) tail_start = *refs_start;

    int first_boundary = !starts.empty() ? starts.front() : tail_start;
    m.entries.push_back({SegmentLabel::front(), 1, first_boundary - 1});
    for (std::size_t i = 0; i < starts.size(); ++i) {
        int end = (i + 1 < starts.size()) ? starts[i + 1] - 1 : tail_start - 1;
        m.entries.push_back({SegmentLabel::chapter(static_cast<int>(i + 1)), starts[i], end});
    }
    if (refs_start) {
        int end = appendix_start ? *appendix_start - 1 : page_count;
        m.entries.push_back({SegmentLabel::references(), *refs_start, end});
    }
    if (appendix_start) {
        m.entries.push_back({SegmentLabel::appendix(), *appendix_start, page_count});
    }
    m.validate(page_count);
    return m;
}

// --- application -----------------------------------------------------------------

std::vector<Segment> apply_manifest(const DocumentRecord& doc, const SegmentManifest& manifest,
                                    const std::vector<std::string>& page_texts) {
    manifest.validate(doc.page_count);
    if (!manifest.doc_id.empty() && manifest.doc_id != doc.doc_id) {
        throw ValidationError("manifest doc_id \"" + manifest.doc_id +
                              "\" does not match document \"" + doc.doc_id + "\"");
    }
    if (page_texts.size() != static_cast<std::size_t>(doc.page_count)) {
        throw ValidationError("document " + doc.doc_id + ": " +
                              std::to_string(page_texts.size()) + " page texts for " +
                              std::to_string(doc.page_count) + " pages");
    }

    std::vector<Segment> segments;
    segments.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        Segment s;
        s.label = e.label;
        s.page_start = e.page_start;
        s.page_end = e.page_end;
        for (int p = e.page_start; p <= e.page_end; ++p) {
            if (p > e.page_start) s.text.push_back('\f');
            s.text += page_texts[static_cast<std::size_t>(p - 1)];
        }
        segments.push_back(std::move(s));
    }
    return segments;
}

SegmentManifest resolve_manifest(const DocumentRecord& doc,
                                 const std::vector<std::string>& page_texts,
                                 const std::optional<SegmentManifest>& manual) {
    if (manual) {
        manual->validate(doc.page_count);
        return *manual;
    }
    auto starts = detect_chapter_starts(page_texts);
    auto refs = detect_references_start(page_texts);
    auto appendix = detect_appendix_start(page_texts);
    // Detected boundaries can disagree (references heading inside a chapter
    // range, appendix before references); drop the inconsistent ones rather
    // than fail, detection is advisory.
    int last_chapter = starts.empty() ? 1 : starts.back();
    if (refs && *refs <= last_chapter) refs.reset();
    if (appendix && (*appendix <= last_chapter || (refs && *appendix <= *refs))) appendix.reset();
    return segments_from_detection(starts, doc.page_count, refs, appendix, doc.doc_id);
}

// --- manifest files -----------------------------------------------------------------

std::vector<SegmentManifest> parse_segment_manifests(std::string_view content,
                                                     const std::string& origin) {
    auto rows = parse_csv(content, origin);
    if (rows.empty()) throw ParseError(origin, 1, "empty manifest file");
    if (rows[0].size() != 4 || rows[0][0] != "doc_id" || rows[0][1] != "label" ||
        rows[0][2] != "page_start" || rows[0][3] != "page_end") {
        throw ParseError(origin, 1, "expected header \"doc_id,label,page_start,page_end\"");
    }

    std::vector<SegmentManifest> manifests;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) throw ParseError(origin, i + 1, "expected 4 fields");
        std::string doc_id = trim(rows[i][0]);
        if (doc_id.empty()) throw ParseError(origin, i + 1, "empty doc_id");

        ManifestEntry entry;
        try {
            entry.label = SegmentLabel::parse(rows[i][1]);
        } catch (const ParseError& e) {
            throw ParseError(origin, i + 1, e.what());
        }
        auto parse_page = [&](const std::string& s, const char* what) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size()) {
                throw ParseError(origin, i + 1, std::string("bad ") + what + " \"" + s + "\"");
            }
            return v;
        };
        entry.page_start = parse_page(trim(rows[i][2]), "page_start");
        entry.page_end = parse_page(trim(rows[i][3]), "page_end");

        if (manifests.empty() || manifests.back().doc_id != doc_id) {
            for (const SegmentManifest& m : manifests) {
                if (m.doc_id == doc_id) {
                    throw ParseError(origin, i + 1,
                                     "rows for \"" + doc_id + "\" are not consecutive");
                }
            }
            manifests.push_back({doc_id, {}});
        }
        manifests.back().entries.push_back(entry);
    }
    return manifests;
}

std::vector<SegmentManifest> load_segment_manifests(const std::filesystem::path& path) {
    return parse_segment_manifests(read_file(path), path.string());
}

std::string serialize_segment_manifests(const std::vector<SegmentManifest>& manifests) {
    std::string out = "doc_id,label,page_start,page_end\n";
    for (const SegmentManifest& m : manifests) {
        for (const ManifestEntry& e : m.entries) {
            out += csv_escape(m.doc_id);
            out += ',';
            out += e.label.to_string();
            out += ',';
            out += std::to_string(e.page_start);
            out += ',';
            out += std::to_string(e.page_end);
            out += '\n';
        }
    }
    return out;
}

}  // namespace chapterkit
