#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace chapterkit {

struct PageDims {
    double width = 0.0;
    double height = 0.0;
};

// One source document: identity, page geometry and free-form metadata.
// metadata["department"] is required whenever the record feeds taxonomy
// mapping.
struct DocumentRecord {
    std::string doc_id;
    int page_count = 0;
    std::vector<PageDims> page_dims;
    std::map<std::string, std::string> metadata;

    void validate() const;
};

struct CategoryPath {
    std::string level1;
    std::string level2;
    std::string level3;
    std::string subject_code;

    friend bool operator==(const CategoryPath&, const CategoryPath&) = default;
};

// Three-level subject hierarchy. The on-disk form is one leaf per line:
// level1<TAB>level2<TAB>level3<TAB>subject_code. Every line carries a full
// path, so depth is exactly 3 by construction; empty components are
// structural errors (they would leave an interior node without children).
class Taxonomy {
public:
    static Taxonomy load(const std::filesystem::path& path);
    static Taxonomy parse(std::string_view content, const std::string& origin);
    static Taxonomy from_leaves(std::vector<CategoryPath> leaves);

    std::string serialize() const;

    const std::vector<CategoryPath>& leaves() const { return leaves_; }
    std::size_t leaf_count() const { return leaves_.size(); }
    bool contains(const CategoryPath& path) const;

    // Leaf lookup by level-3 name, case/whitespace-insensitive. Empty when
    // absent; throws ValidationError when the name is ambiguous across
    // parents.
    std::optional<CategoryPath> find_leaf(std::string_view level3) const;

private:
    std::vector<CategoryPath> leaves_;  // file order
};

// Department-string -> taxonomy-leaf alias table. Construction seeds an
// identity alias for every leaf name; the CSV (header "alias,level3") adds
// variants. Matching is exact on canonical_key; fuzzy mapping lives in the
// llm module, not here.
class AliasTable {
public:
    static AliasTable identity(const Taxonomy& taxonomy);
    static AliasTable load(const std::filesystem::path& path, const Taxonomy& taxonomy);
    static AliasTable parse(std::string_view content, const std::string& origin,
                            const Taxonomy& taxonomy);

    std::optional<CategoryPath> resolve(std::string_view department) const;
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, CategoryPath> map_;  // canonical_key(alias) -> path
};

CategoryPath map_department(const std::string& department, const Taxonomy& taxonomy,
                            const AliasTable& aliases);

// Ordered inventory of canonical class names; order fixes score-vector
// positions.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    const std::string& at(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string>& labels() const { return labels_; }

    std::optional<std::size_t> index_of(std::string_view label) const;
    std::optional<std::size_t> index_of_canonical(std::string_view label) const;

    // Stable identifier (FNV-1a over the joined inventory) for reports.
    std::string id() const;

    friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, std::size_t> canonical_index_;
};

using LabeledDoc = std::pair<std::string, std::string>;  // (doc_id, label)

struct SplitResult {
    std::vector<LabeledDoc> train;
    std::vector<LabeledDoc> test;
};

// Deterministic per-label split: labels processed in lexicographic order,
// instances shuffled by a splitmix64 stream keyed on (seed, label), floor of
// train_fraction*n into train, remainder to test.
SplitResult stratified_split(const std::vector<LabeledDoc>& records, double train_fraction,
                             std::uint64_t seed);

// Corpus manifest: CSV "doc_id,department,page_count" plus one
// "<doc_id>.dims" file per document ("width height" per page) in dims_dir.
std::vector<DocumentRecord> load_corpus_manifest(const std::filesystem::path& manifest_csv,
                                                 const std::filesystem::path& dims_dir);

}  // namespace chapterkit
