#include "chapterkit/layout.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/text.hpp"

namespace chapterkit {

void BBox::validate() const {
    if (!(x0 < x1) || !(y0 < y1)) {
        std::ostringstream os;
        os << "degenerate bbox (" << x0 << "," << y0 << "," << x1 << "," << y1 << ")";
        throw ValidationError(os.str());
    }
}

std::string_view to_string(OcrBlockType t) {
    switch (t) {
        case OcrBlockType::kPage: return "PAGE";
        case OcrBlockType::kLine: return "LINE";
        case OcrBlockType::kWord: return "WORD";
    }
    return "?";
}

namespace {

constexpr double kPageBoxTolerance = 1e-6;

OcrBlockType block_type_from_string(const std::string& s, const std::string& origin) {
    if (s == "PAGE") return OcrBlockType::kPage;
    if (s == "LINE") return OcrBlockType::kLine;
    if (s == "WORD") return OcrBlockType::kWord;
    throw ParseError(origin + ": unknown BlockType \"" + s + "\"");
}

const std::pair<RegionLabel, std::string_view> kRegionNames[] = {
    {RegionLabel::kParagraph, "paragraph"},
    {RegionLabel::kChapterTitle, "chapter_title"},
    {RegionLabel::kSectionHeader, "section_header"},
    {RegionLabel::kPageHeader, "page_header"},
    {RegionLabel::kPageFooter, "page_footer"},
    {RegionLabel::kCaption, "caption"},
    {RegionLabel::kFigure, "figure"},
    {RegionLabel::kTable, "table"},
    {RegionLabel::kEquation, "equation"},
    {RegionLabel::kFootnote, "footnote"},
    {RegionLabel::kReferenceEntry, "reference_entry"},
    {RegionLabel::kOther, "other"},
};

}  // namespace

RegionLabel region_label_from_string(std::string_view s) {
    for (const auto& [label, name] : kRegionNames) {
        if (s == name) return label;
    }
    throw ParseError("unknown region label \"" + std::string(s) + "\"");
}

std::string_view to_string(RegionLabel label) {
    for (const auto& [l, name] : kRegionNames) {
        if (l == label) return name;
    }
    return "?";
}

void FilterPolicy::validate() const {
    if (!(containment_threshold > 0.0 && containment_threshold <= 1.0)) {
        throw ValidationError("containment_threshold must lie in (0,1]");
    }
}

// --- OCR dump ---------------------------------------------------------------

std::vector<OcrBlock> parse_ocr_dump(const std::filesystem::path& path) {
    return parse_ocr_dump_json(read_file(path), path.string());
}

std::vector<OcrBlock> parse_ocr_dump_json(const std::string& content, const std::string& origin) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(origin + ": expected a JSON array of blocks");

    std::vector<OcrBlock> blocks;
    blocks.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const nlohmann::json& j = doc[i];
        std::string at = origin + ": block " + std::to_string(i);
        if (!j.is_object()) throw ParseError(at + " is not an object");

        OcrBlock b;
        try {
            b.id = j.at("Id").get<std::string>();
            b.type = block_type_from_string(j.at("BlockType").get<std::string>(), at);
            b.page = j.at("Page").get<int>();
            b.text = j.value("Text", std::string());
            b.confidence = j.value("Confidence", 100.0);
            const nlohmann::json& box = j.at("Geometry").at("BoundingBox");
            double left = box.at("Left").get<double>();
            double top = box.at("Top").get<double>();
            double width = box.at("Width").get<double>();
            double height = box.at("Height").get<double>();
            b.bbox = BBox{left, top, left + width, top + height};
            if (j.contains("Relationships")) {
                for (const nlohmann::json& rel : j.at("Relationships")) {
                    if (rel.value("Type", std::string()) != "CHILD") continue;
                    for (const nlohmann::json& id : rel.at("Ids")) {
                        b.children.push_back(id.get<std::string>());
                    }
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(at + ": " + e.what());
        }

        if (b.page < 1) throw ValidationError(at + ": page must be >= 1");
        if (b.confidence < 0.0 || b.confidence > 100.0) {
            throw ValidationError(at + ": confidence outside [0,100]");
        }
        b.bbox.validate();
        if (b.type == OcrBlockType::kPage) {
            if (std::abs(b.bbox.x0) > kPageBoxTolerance || std::abs(b.bbox.y0) > kPageBoxTolerance ||
                std::abs(b.bbox.x1 - 1.0) > kPageBoxTolerance ||
                std::abs(b.bbox.y1 - 1.0) > kPageBoxTolerance) {
                throw ValidationError(at + ": PAGE bbox must be (0,0,1,1)");
            }
        } else {
            // Fractional coordinates; tolerate rounding spill and clamp.
            if (b.bbox.x0 < -kPageBoxTolerance || b.bbox.y0 < -kPageBoxTolerance ||
                b.bbox.x1 > 1.0 + kPageBoxTolerance || b.bbox.y1 > 1.0 + kPageBoxTolerance) {
                throw ValidationError(at + ": bbox outside [0,1]");
            }
            b.bbox.x0 = std::clamp(b.bbox.x0, 0.0, 1.0);
            b.bbox.y0 = std::clamp(b.bbox.y0, 0.0, 1.0);
            b.bbox.x1 = std::clamp(b.bbox.x1, 0.0, 1.0);
            b.bbox.y1 = std::clamp(b.bbox.y1, 0.0, 1.0);
        }
        blocks.push_back(std::move(b));
    }

    // Referential checks.
    std::unordered_map<std::string, const OcrBlock*> by_id;
    for (const OcrBlock& b : blocks) {
        if (!by_id.emplace(b.id, &b).second) {
            throw ValidationError(origin + ": duplicate block id \"" + b.id + "\"");
        }
    }
    for (const OcrBlock& b : blocks) {
        for (const std::string& child : b.children) {
            auto it = by_id.find(child);
            if (it == by_id.end()) {
                throw ValidationError(origin + ": block \"" + b.id +
                                      "\" references missing child \"" + child + "\"");
            }
            if (b.type == OcrBlockType::kLine && it->second->type != OcrBlockType::kWord) {
                throw ValidationError(origin + ": LINE \"" + b.id + "\" child \"" + child +
                                      "\" is not a WORD");
            }
        }
    }
    return blocks;
}

// --- layout regions ----------------------------------------------------------

std::vector<LayoutRegion> parse_layout_file(const std::filesystem::path& path) {
    return parse_layout_lines(read_file(path), path.string());
}

std::vector<LayoutRegion> parse_layout_lines(std::string_view content, const std::string& origin) {
    std::vector<LayoutRegion> regions;
    std::size_t lineno = 0;
    for (const std::string& raw : split_lines(content)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty()) continue;

        std::istringstream ls(line);
        int page = 0;
        std::string label;
        double x0, y0, x1, y1, score;
        if (!(ls >> page >> label >> x0 >> y0 >> x1 >> y1 >> score)) {
            throw ParseError(origin, lineno, "expected \"page label x0 y0 x1 y1 score\"");
        }
        std::string extra;
        if (ls >> extra) throw ParseError(origin, lineno, "trailing content \"" + extra + "\"");

        LayoutRegion r;
        try {
            r.label = region_label_from_string(label);
        } catch (const ParseError& e) {
            throw ParseError(origin, lineno, e.what());
        }
        r.page = page;
        r.bbox = BBox{x0, y0, x1, y1};
        r.score = score;
        if (r.page < 1) throw ValidationError(origin + ":" + std::to_string(lineno) +
                                              ": page must be >= 1");
        if (r.score < 0.0 || r.score > 1.0) {
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": score outside [0,1]");
        }
        try {
            r.bbox.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
        regions.push_back(r);
    }
    return regions;
}

// --- geometry ----------------------------------------------------------------

BBox normalize_bbox(const BBox& b, double page_width, double page_height, bool* clamped) {
    if (!(page_width > 0.0) || !(page_height > 0.0)) {
        throw ValidationError("normalize_bbox: page dimensions must be positive");
    }
    BBox n{b.x0 / page_width, b.y0 / page_height, b.x1 / page_width, b.y1 / page_height};
    BBox c{std::clamp(n.x0, 0.0, 1.0), std::clamp(n.y0, 0.0, 1.0), std::clamp(n.x1, 0.0, 1.0),
           std::clamp(n.y1, 0.0, 1.0)};
    if (clamped) *clamped = !(c == n);
    c.validate();
    return c;
}

double containment(const BBox& inner, const BBox& outer) {
    double ix0 = std::max(inner.x0, outer.x0);
    double iy0 = std::max(inner.y0, outer.y0);
    double ix1 = std::min(inner.x1, outer.x1);
    double iy1 = std::min(inner.y1, outer.y1);
    if (ix0 >= ix1 || iy0 >= iy1) return 0.0;
    return (ix1 - ix0) * (iy1 - iy0) / inner.area();
}

// --- filtering -----------------------------------------------------------------

std::vector<OcrBlock> filter_blocks(const std::vector<OcrBlock>& blocks,
                                    const std::vector<LayoutRegion>& regions,
                                    std::span<const PageDims> dims, const FilterPolicy& policy,
                                    FilterStats* stats) {
    policy.validate();

    std::vector<LayoutRegion> drop_regions;
    for (const LayoutRegion& r : regions) {
        if (!policy.drop_labels.count(r.label)) continue;
        LayoutRegion n = r;
        if (!dims.empty()) {
            if (static_cast<std::size_t>(r.page) > dims.size()) {
                throw ValidationError("region on page " + std::to_string(r.page) +
                                      " exceeds the " + std::to_string(dims.size()) +
                                      "-page dims list");
            }
            bool clamped = false;
            n.bbox = normalize_bbox(r.bbox, dims[r.page - 1].width, dims[r.page - 1].height,
                                    &clamped);
            if (clamped && stats) ++stats->clamped_regions;
        }
        drop_regions.push_back(n);
    }

    std::unordered_set<std::string> dropped_lines;
    for (const OcrBlock& b : blocks) {
        if (b.type != OcrBlockType::kLine) continue;
        for (const LayoutRegion& r : drop_regions) {
            if (r.page != b.page) continue;
            if (containment(b.bbox, r.bbox) >= policy.containment_threshold) {
                dropped_lines.insert(b.id);
                if (stats) ++stats->dropped_lines_by_label[r.label];
                break;
            }
        }
    }

    // Words follow their parent line.
    std::unordered_set<std::string> dropped_words;
    for (const OcrBlock& b : blocks) {
        if (b.type == OcrBlockType::kLine && dropped_lines.count(b.id)) {
            dropped_words.insert(b.children.begin(), b.children.end());
        }
    }

    std::vector<OcrBlock> kept;
    kept.reserve(blocks.size());
    for (const OcrBlock& b : blocks) {
        if (b.type == OcrBlockType::kLine && dropped_lines.count(b.id)) continue;
        if (b.type == OcrBlockType::kWord && dropped_words.count(b.id)) continue;
        kept.push_back(b);
    }
    return kept;
}

// --- assembly -------------------------------------------------------------------

namespace {

std::vector<const OcrBlock*> ordered_lines(const std::vector<OcrBlock>& blocks) {
    std::vector<const OcrBlock*> lines;
    for (const OcrBlock& b : blocks) {
        if (b.type == OcrBlockType::kLine) lines.push_back(&b);
    }
    std::sort(lines.begin(), lines.end(), [](const OcrBlock* a, const OcrBlock* b) {
        return std::tie(a->page, a->bbox.y0, a->bbox.x0, a->text, a->id) <
               std::tie(b->page, b->bbox.y0, b->bbox.x0, b->text, b->id);
    });
    return lines;
}

}  // namespace

std::string assemble_text(const std::vector<OcrBlock>& blocks) {
    auto lines = ordered_lines(blocks);
    std::string out;
    int current_page = 0;
    bool page_has_lines = false;
    for (const OcrBlock* l : lines) {
        if (l->page != current_page) {
            if (page_has_lines) out.push_back('\f');
            current_page = l->page;
            page_has_lines = false;
        }
        if (page_has_lines) out.push_back('\n');
        out += trim(l->text);
        page_has_lines = true;
    }
    return out;
}

std::vector<std::string> assemble_pages(const std::vector<OcrBlock>& blocks, int page_count) {
    if (page_count < 0) throw ValidationError("assemble_pages: negative page_count");
    std::vector<std::string> pages(static_cast<std::size_t>(page_count));
    for (const OcrBlock* l : ordered_lines(blocks)) {
        if (l->page < 1 || l->page > page_count) {
            throw ValidationError("line \"" + l->id + "\" on page " + std::to_string(l->page) +
                                  " outside 1.." + std::to_string(page_count));
        }
        std::string& page = pages[static_cast<std::size_t>(l->page - 1)];
        if (!page.empty()) page.push_back('\n');
        page += trim(l->text);
    }
    return pages;
}

}  // namespace chapterkit
