#include "chapterkit/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/rng.hpp"
#include "chapterkit/text.hpp"

namespace chapterkit {

void DocumentRecord::validate() const {
    if (doc_id.empty()) throw ValidationError("document has empty doc_id");
    if (page_count < 1) {
        throw ValidationError("document " + doc_id + ": page_count must be >= 1");
    }
    if (page_dims.size() != static_cast<std::size_t>(page_count)) {
        throw ValidationError("document " + doc_id + ": " + std::to_string(page_dims.size()) +
                              " page dims for " + std::to_string(page_count) + " pages");
    }
    for (std::size_t i = 0; i < page_dims.size(); ++i) {
        if (page_dims[i].width <= 0.0 || page_dims[i].height <= 0.0) {
            throw ValidationError("document " + doc_id + ": nonpositive dims on page " +
                                  std::to_string(i + 1));
        }
    }
}

// --- Taxonomy ---------------------------------------------------------------

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
}

Taxonomy Taxonomy::parse(std::string_view content, const std::string& origin) {
    std::vector<CategoryPath> leaves;
    std::size_t lineno = 0;
    for (const std::string& raw : split_lines(content)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= raw.size(); ++i) {
            if (i == raw.size() || raw[i] == '\t') {
                fields.push_back(trim(std::string_view(raw).substr(start, i - start)));
                start = i + 1;
            }
        }
        if (fields.size() != 4) {
            throw ParseError(origin, lineno,
                             "expected 4 tab-separated fields, got " +
                                 std::to_string(fields.size()));
        }
        CategoryPath p{fields[0], fields[1], fields[2], fields[3]};
        if (p.level1.empty()) throw ParseError(origin, lineno, "empty level-1 name");
        if (p.level2.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": level-1 node \"" +
                                  p.level1 + "\" has no level-2 child");
        }
        if (p.level3.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": level-2 node \"" +
                                  p.level2 + "\" has no level-3 child");
        }
        if (p.subject_code.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": leaf \"" + p.level3 +
                                  "\" has empty subject_code");
        }
        leaves.push_back(std::move(p));
    }
    return from_leaves(std::move(leaves));
}

Taxonomy Taxonomy::from_leaves(std::vector<CategoryPath> leaves) {
    // Sibling uniqueness at every level.
    std::map<std::pair<std::string, std::string>, std::string> seen_leaf;
    for (const CategoryPath& p : leaves) {
        auto key = std::make_pair(canonical_key(p.level1) + "\t" + canonical_key(p.level2),
                                  canonical_key(p.level3));
        auto [it, inserted] = seen_leaf.emplace(key, p.level3);
        if (!inserted) {
            throw ValidationError("duplicate leaf \"" + p.level3 + "\" under \"" + p.level1 +
                                  " / " + p.level2 + "\"");
        }
    }
    Taxonomy t;
    t.leaves_ = std::move(leaves);
    return t;
}

std::string Taxonomy::serialize() const {
    std::string out;
    for (const CategoryPath& p : leaves_) {
        out += p.level1;
        out += '\t';
        out += p.level2;
        out += '\t';
        out += p.level3;
        out += '\t';
        out += p.subject_code;
        out += '\n';
    }
    return out;
}

bool Taxonomy::contains(const CategoryPath& path) const {
    return std::find(leaves_.begin(), leaves_.end(), path) != leaves_.end();
}

std::optional<CategoryPath> Taxonomy::find_leaf(std::string_view level3) const {
    std::string key = canonical_key(level3);
    const CategoryPath* found = nullptr;
    for (const CategoryPath& p : leaves_) {
        if (canonical_key(p.level3) == key) {
            if (found && !(*found == p)) {
                throw ValidationError("leaf name \"" + std::string(level3) +
                                      "\" is ambiguous across parents");
            }
            found = &p;
        }
    }
    if (!found) return std::nullopt;
    return *found;
}

// --- AliasTable -------------------------------------------------------------

AliasTable AliasTable::identity(const Taxonomy& taxonomy) {
    AliasTable t;
    for (const CategoryPath& p : taxonomy.leaves()) {
        t.map_[canonical_key(p.level3)] = p;
    }
    return t;
}

AliasTable AliasTable::load(const std::filesystem::path& path, const Taxonomy& taxonomy) {
    return parse(read_file(path), path.string(), taxonomy);
}

AliasTable AliasTable::parse(std::string_view content, const std::string& origin,
                             const Taxonomy& taxonomy) {
    AliasTable t = identity(taxonomy);
    auto rows = parse_csv(content, origin);
    if (rows.empty()) throw ParseError(origin, 1, "empty alias file");
    if (rows[0].size() != 2 || canonical_key(rows[0][0]) != "alias" ||
        canonical_key(rows[0][1]) != "level3") {
        throw ParseError(origin, 1, "expected header \"alias,level3\"");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw ParseError(origin, i + 1, "expected 2 fields");
        }
        const std::string& alias = rows[i][0];
        const std::string& level3 = rows[i][1];
        if (trim(alias).empty()) throw ParseError(origin, i + 1, "empty alias");
        auto leaf = taxonomy.find_leaf(level3);
        if (!leaf) {
            throw ParseError(origin, i + 1, "level3 \"" + level3 + "\" is not a taxonomy leaf");
        }
        t.map_[canonical_key(alias)] = *leaf;
    }
    return t;
}

std::optional<CategoryPath> AliasTable::resolve(std::string_view department) const {
    auto it = map_.find(canonical_key(department));
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

CategoryPath map_department(const std::string& department, const Taxonomy& taxonomy,
                            const AliasTable& aliases) {
    if (trim(department).empty()) {
        throw ValidationError("map_department: department must be nonempty");
    }
    auto path = aliases.resolve(department);
    if (!path) throw UnmappedDepartmentError(department);
    if (!taxonomy.contains(*path)) {
        throw ValidationError("alias for \"" + department + "\" resolves outside the taxonomy");
    }
    return *path;
}

// --- LabelSet ---------------------------------------------------------------

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (trim(labels_[i]).empty()) {
            throw ValidationError("label " + std::to_string(i) + " is empty");
        }
        if (!index_.emplace(labels_[i], i).second) {
            throw ValidationError("duplicate label \"" + labels_[i] + "\"");
        }
        if (!canonical_index_.emplace(canonical_key(labels_[i]), i).second) {
            throw ValidationError("labels \"" + labels_[i] +
                                  "\" collide under case/whitespace folding");
        }
    }
}

std::optional<std::size_t> LabelSet::index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> LabelSet::index_of_canonical(std::string_view label) const {
    auto it = canonical_index_.find(canonical_key(label));
    if (it == canonical_index_.end()) return std::nullopt;
    return it->second;
}

std::string LabelSet::id() const {
    std::string joined;
    for (const std::string& l : labels_) {
        joined += l;
        joined += '\x1f';
    }
    std::uint64_t h = fnv1a64(joined.data(), joined.size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string("labels-") + buf + "-" + std::to_string(labels_.size());
}

// --- stratified split -------------------------------------------------------

SplitResult stratified_split(const std::vector<LabeledDoc>& records, double train_fraction,
                             std::uint64_t seed) {
    if (records.empty()) throw ValidationError("stratified_split: no records");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("stratified_split: train_fraction must lie in (0,1)");
    }

    // Lexicographic label order makes the output independent of input
    // grouping; within a label, input order feeds the shuffle.
    std::map<std::string, std::vector<LabeledDoc>> by_label;
    for (const LabeledDoc& r : records) by_label[r.second].push_back(r);

    SplitResult result;
    for (auto& [label, group] : by_label) {
        if (group.size() < 2) throw StratificationError(label, group.size());
        SplitMix64 rng(seed ^ fnv1a64(label.data(), label.size()));
        deterministic_shuffle(group, rng);
        auto n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(group.size())));
        for (std::size_t i = 0; i < group.size(); ++i) {
            (i < n_train ? result.train : result.test).push_back(group[i]);
        }
    }
    return result;
}

// --- corpus manifest --------------------------------------------------------

std::vector<DocumentRecord> load_corpus_manifest(const std::filesystem::path& manifest_csv,
                                                 const std::filesystem::path& dims_dir) {
    auto rows = parse_csv(read_file(manifest_csv), manifest_csv.string());
    if (rows.empty()) throw ParseError(manifest_csv.string(), 1, "empty manifest");
    if (rows[0].size() != 3 || rows[0][0] != "doc_id" || rows[0][1] != "department" ||
        rows[0][2] != "page_count") {
        throw ParseError(manifest_csv.string(), 1,
                         "expected header \"doc_id,department,page_count\"");
    }

    std::vector<DocumentRecord> docs;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) throw ParseError(manifest_csv.string(), i + 1, "expected 3 fields");
        DocumentRecord doc;
        doc.doc_id = trim(rows[i][0]);
        doc.metadata["department"] = trim(rows[i][1]);
        int pages = 0;
        auto [ptr, ec] = std::from_chars(rows[i][2].data(), rows[i][2].data() + rows[i][2].size(),
                                         pages);
        if (ec != std::errc() || ptr != rows[i][2].data() + rows[i][2].size()) {
            throw ParseError(manifest_csv.string(), i + 1, "bad page_count \"" + rows[i][2] + "\"");
        }
        doc.page_count = pages;

        std::filesystem::path dims_path = dims_dir / (doc.doc_id + ".dims");
        std::string dims_content = read_file(dims_path);
        std::size_t lineno = 0;
        for (const std::string& line : split_lines(dims_content)) {
            ++lineno;
            std::string t = trim(line);
            if (t.empty()) continue;
            std::istringstream ls(t);
            PageDims d;
            if (!(ls >> d.width >> d.height)) {
                throw ParseError(dims_path.string(), lineno, "expected \"width height\"");
            }
            doc.page_dims.push_back(d);
        }
        doc.validate();
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace chapterkit
