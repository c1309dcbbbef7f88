#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chapterkit/corpus.hpp"

namespace chapterkit {

enum class SegmentKind { kFront, kChapter, kReferences, kAppendix };

struct SegmentLabel {
    SegmentKind kind = SegmentKind::kFront;
    int chapter_index = 0;  // >= 1 iff kind == kChapter

    static SegmentLabel front() { return {SegmentKind::kFront, 0}; }
    static SegmentLabel chapter(int i);
    static SegmentLabel references() { return {SegmentKind::kReferences, 0}; }
    static SegmentLabel appendix() { return {SegmentKind::kAppendix, 0}; }

    // "front" | "chapter<i>" | "references" | "appendix"
    static SegmentLabel parse(std::string_view s);
    std::string to_string() const;

    friend bool operator==(const SegmentLabel&, const SegmentLabel&) = default;
};

struct ManifestEntry {
    SegmentLabel label;
    int page_start = 1;  // 1-based inclusive
    int page_end = 1;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Ordered page-range entries for one document. validate() enforces the
// segmentation conventions: exactly one leading front entry, chapters 1..n
// in order, optional references then optional appendix after all chapters,
// ranges contiguous and covering 1..page_count exactly.
struct SegmentManifest {
    std::string doc_id;
    std::vector<ManifestEntry> entries;

    void validate(int page_count) const;  // throws ValidationError listing offending pages
};

struct Segment {
    SegmentLabel label;
    int page_start = 1;
    int page_end = 1;
    std::string text;
};

// Heading heuristics over per-page text. Advisory only: manual manifests are
// authoritative. Scans the first 5 nonempty lines of each page for
// "CHAPTER <arabic|roman>", "<n>. Title" or a bare "<n>" / "<n>." line
// followed by a title-case line. Page 1 is never a chapter start.
std::vector<int> detect_chapter_starts(const std::vector<std::string>& pages);

// First page (excluding 1) whose heading window holds an exact
// "REFERENCES"/"BIBLIOGRAPHY" line, resp. a line starting with "APPENDIX".
std::optional<int> detect_references_start(const std::vector<std::string>& pages);
std::optional<int> detect_appendix_start(const std::vector<std::string>& pages);

SegmentManifest segments_from_detection(const std::vector<int>& starts, int page_count,
                                        std::optional<int> refs_start,
                                        std::optional<int> appendix_start,
                                        std::string doc_id = {});

// Cuts page_texts along the manifest. Pages of one segment are joined by
// '\f', matching the page separator used by assemble_text.
std::vector<Segment> apply_manifest(const DocumentRecord& doc, const SegmentManifest& manifest,
                                    const std::vector<std::string>& page_texts);

// Manual manifest overrides detection whenever both are available.
SegmentManifest resolve_manifest(const DocumentRecord& doc,
                                 const std::vector<std::string>& page_texts,
                                 const std::optional<SegmentManifest>& manual);

// Manifest file: CSV "doc_id,label,page_start,page_end"; rows of one
// document must be consecutive and in segment order.
std::vector<SegmentManifest> parse_segment_manifests(std::string_view content,
                                                     const std::string& origin);
std::vector<SegmentManifest> load_segment_manifests(const std::filesystem::path& path);
std::string serialize_segment_manifests(const std::vector<SegmentManifest>& manifests);

}  // namespace chapterkit
