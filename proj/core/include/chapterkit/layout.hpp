#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chapterkit/corpus.hpp"

namespace chapterkit {

// Axis-aligned box, origin top-left, y growing downward.
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    void validate() const;  // x0 < x1, y0 < y1

    friend bool operator==(const BBox&, const BBox&) = default;
};

enum class OcrBlockType { kPage, kLine, kWord };

std::string_view to_string(OcrBlockType t);

// One positional block from the OCR dump. bbox is fractional page
// coordinates in [0,1].
struct OcrBlock {
    std::string id;
    OcrBlockType type = OcrBlockType::kLine;
    std::string text;
    BBox bbox;
    double confidence = 100.0;  // [0,100]
    int page = 1;               // 1-based
    std::vector<std::string> children;
};

enum class RegionLabel {
    kParagraph,
    kChapterTitle,
    kSectionHeader,
    kPageHeader,
    kPageFooter,
    kCaption,
    kFigure,
    kTable,
    kEquation,
    kFootnote,
    kReferenceEntry,
    kOther,
};

RegionLabel region_label_from_string(std::string_view s);  // throws ParseError
std::string_view to_string(RegionLabel label);

// One detected page element. bbox is in detector pixel coordinates until
// normalized.
struct LayoutRegion {
    RegionLabel label = RegionLabel::kOther;
    BBox bbox;
    int page = 1;
    double score = 0.0;  // [0,1]
};

struct FilterPolicy {
    std::set<RegionLabel> drop_labels = {
        RegionLabel::kPageHeader, RegionLabel::kPageFooter, RegionLabel::kCaption,
        RegionLabel::kFigure,     RegionLabel::kEquation,
    };
    double containment_threshold = 0.5;  // (0,1]

    void validate() const;
};

// OCR dump: JSON array of objects with Id, BlockType, Text, Page,
// Confidence, Geometry.BoundingBox{Left,Top,Width,Height} (fractions) and
// optional Relationships [{Type:"CHILD", Ids:[...]}].
std::vector<OcrBlock> parse_ocr_dump(const std::filesystem::path& path);
std::vector<OcrBlock> parse_ocr_dump_json(const std::string& content, const std::string& origin);

// Region file: one region per line, "page label x0 y0 x1 y1 score", pixel
// coordinates.
std::vector<LayoutRegion> parse_layout_file(const std::filesystem::path& path);
std::vector<LayoutRegion> parse_layout_lines(std::string_view content, const std::string& origin);

// Divide by page dimensions into [0,1], clamping at the bounds. *clamped is
// set when clamping changed a coordinate.
BBox normalize_bbox(const BBox& b, double page_width, double page_height,
                    bool* clamped = nullptr);

// area(inner ∩ outer) / area(inner); 0 when disjoint.
double containment(const BBox& inner, const BBox& outer);

struct FilterStats {
    std::map<RegionLabel, std::size_t> dropped_lines_by_label;
    std::size_t clamped_regions = 0;
};

// Drops every LINE contained (>= policy threshold) in a drop-labeled region
// on its page; WORDs follow their parent LINE; PAGE blocks are kept. Pass
// dims to normalize pixel-space regions, or an empty span when the regions
// are already fractional.
std::vector<OcrBlock> filter_blocks(const std::vector<OcrBlock>& blocks,
                                    const std::vector<LayoutRegion>& regions,
                                    std::span<const PageDims> dims, const FilterPolicy& policy,
                                    FilterStats* stats = nullptr);

// Reading order: per page, LINE texts sorted by (y0, x0), joined by '\n';
// pages joined by '\f'. Single-column assumption; ties broken by (text, id)
// so the result is permutation-invariant.
std::string assemble_text(const std::vector<OcrBlock>& blocks);

// Same ordering, but one string per page 1..page_count (empty when a page
// has no lines).
std::vector<std::string> assemble_pages(const std::vector<OcrBlock>& blocks, int page_count);

}  // namespace chapterkit
