#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace stcert
{

using ClassId = int;

struct ClassEntry
{
    ClassId class_id = 0;
    std::string synset;
    std::string lemma;
    /// Category identifiers, most specific first. Consecutive entries are
    /// parent links in the hypernym DAG.
    std::vector<std::string> hypernyms;
};

/// A named grouping of fine-grained classes into disjoint super-classes.
struct DatasetSpec
{
    std::string name;
    std::map<std::string, std::set<ClassId>> superclasses;
};

enum class ErrorKind
{
    Correct,
    Intra,
    Inter
};

std::string_view to_string(ErrorKind kind);

/// How a prediction with no resolvable super-class is scored.
enum class OutOfDatasetPolicy
{
    TreatAsInter,
    TreatAsIntra
};

/// Class catalog, hypernym DAG and super-class dataset specs.
///
/// Immutable after construction; all queries are const and safe to call
/// concurrently.
class Taxonomy
{
public:
    Taxonomy() = default;
    Taxonomy(std::vector<ClassEntry> classes, std::map<std::string, DatasetSpec> datasets);

    static Taxonomy load(const std::filesystem::path& path);
    static Taxonomy from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return classes_.size(); }
    const std::vector<ClassEntry>& classes() const { return classes_; }
    const std::map<std::string, DatasetSpec>& datasets() const { return datasets_; }

    bool contains(ClassId id) const;
    const ClassEntry& entry(ClassId id) const;
    std::optional<ClassId> find_synset(std::string_view synset) const;
    /// All classes whose lemma matches (case-insensitive, '_' and ' ' equivalent).
    std::vector<ClassId> find_lemma(std::string_view lemma) const;
    const DatasetSpec& dataset(std::string_view name) const;
    bool has_dataset(std::string_view name) const;

    /// Text prompt for a class: first lemma, lowercased, underscores as spaces.
    std::string prompt_for(ClassId id) const;

    /// Super-class of `id` in `dataset`, if any. Direct membership is checked
    /// first, then the hypernym chain most-specific-first against the
    /// super-class names.
    std::optional<std::string> superclass_of(ClassId id, std::string_view dataset) const;

    ErrorKind error_kind(ClassId prediction,
                         ClassId truth,
                         std::string_view dataset,
                         OutOfDatasetPolicy policy = OutOfDatasetPolicy::TreatAsInter) const;

    /// 1 / (1 + d) with d the undirected hypernym-graph distance; 0 when
    /// the two classes are not connected.
    double path_similarity(ClassId a, ClassId b) const;

    /// Category identifiers strictly below `category` (intermediate nodes
    /// and classes' synsets).
    std::set<std::string> hyponyms_of(std::string_view category) const;
    /// Ancestors of `category` as seen along the stored hypernym chains.
    std::set<std::string> hypernyms_of(std::string_view category) const;

private:
    void build_graph();
    int node_index(const std::string& name);

    std::vector<ClassEntry> classes_; // indexed by class_id
    std::map<std::string, DatasetSpec> datasets_;
    std::unordered_map<std::string, ClassId> by_synset_;
    std::vector<std::string> node_names_;
    std::unordered_map<std::string, int> node_ids_;
    std::vector<std::vector<int>> adjacency_;   // undirected
    std::vector<std::vector<int>> parents_;     // directed child -> parent
};

} // namespace stcert
