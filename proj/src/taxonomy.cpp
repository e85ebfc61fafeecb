#include "stcert/taxonomy.hpp"

#include "stcert/error.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <regex>
#include <sstream>

namespace stcert
{

namespace
{

using nlohmann::json;

std::string normalize_name(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        out.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where)
{
    for (const auto& [key, _] : obj.items())
    {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw TaxonomyError(where + ": unknown key \"" + key + "\"");
    }
}

const json& require(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw TaxonomyError(where + ": missing key \"" + key + "\"");
    return *it;
}

int as_class_id(const json& v, const std::string& where)
{
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw TaxonomyError(where + ": expected a non-negative integer class id");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& where)
{
    if (!v.is_string())
        throw TaxonomyError(where + ": expected a string");
    return v.get<std::string>();
}

// Expected super-class count encoded in names such as "mixed_10".
std::optional<std::size_t> conventional_count(const std::string& name)
{
    static const std::regex pattern(R"(.*_(\d+))");
    std::smatch m;
    if (std::regex_match(name, m, pattern))
        return static_cast<std::size_t>(std::stoul(m[1].str()));
    return std::nullopt;
}

} // namespace

std::string_view to_string(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::Correct:
        return "Correct";
    case ErrorKind::Intra:
        return "Intra";
    case ErrorKind::Inter:
        return "Inter";
    }
    return "?";
}

Taxonomy::Taxonomy(std::vector<ClassEntry> classes, std::map<std::string, DatasetSpec> datasets)
    : datasets_(std::move(datasets))
{
    const auto n = classes.size();
    classes_.resize(n);
    std::vector<bool> seen(n, false);
    for (std::size_t i = 0; i < classes.size(); ++i)
    {
        auto& c = classes[i];
        const auto where = "classes[" + std::to_string(i) + "]";
        if (c.class_id < 0 || static_cast<std::size_t>(c.class_id) >= n)
            throw TaxonomyError(where + ": class id " + std::to_string(c.class_id) +
                                " outside 0.." + std::to_string(n - 1));
        if (seen[c.class_id])
            throw TaxonomyError(where + ": duplicate class id " + std::to_string(c.class_id));
        seen[c.class_id] = true;
        if (c.lemma.empty())
            throw TaxonomyError(where + ": empty lemma");
        if (c.synset.empty())
            throw TaxonomyError(where + ": empty synset");
        if (!by_synset_.emplace(c.synset, c.class_id).second)
            throw TaxonomyError(where + ": duplicate synset \"" + c.synset + "\"");
        std::set<std::string> chain{c.synset};
        for (const auto& h : c.hypernyms)
        {
            if (!chain.insert(h).second)
                throw TaxonomyError(where + ": hypernym chain revisits \"" + h + "\"");
        }
        classes_[c.class_id] = std::move(c);
    }

    for (auto& [name, spec] : datasets_)
    {
        const auto where = "datasets." + name;
        spec.name = name;
        if (auto expected = conventional_count(name); expected && *expected != spec.superclasses.size())
            throw TaxonomyError(where + ": name implies " + std::to_string(*expected) +
                                " super-classes but " + std::to_string(spec.superclasses.size()) +
                                " are defined");
        std::map<ClassId, std::string> owner;
        for (const auto& [super, members] : spec.superclasses)
        {
            for (ClassId id : members)
            {
                if (!contains(id))
                    throw TaxonomyError(where + "." + super + ": dangling class id " + std::to_string(id));
                auto [it, fresh] = owner.emplace(id, super);
                if (!fresh)
                    throw TaxonomyError(where + ": class id " + std::to_string(id) + " is in both \"" +
                                        it->second + "\" and \"" + super + "\"");
            }
        }
    }

    build_graph();
}

int Taxonomy::node_index(const std::string& name)
{
    auto [it, fresh] = node_ids_.emplace(name, static_cast<int>(node_names_.size()));
    if (fresh)
    {
        node_names_.push_back(name);
        adjacency_.emplace_back();
        parents_.emplace_back();
    }
    return it->second;
}

void Taxonomy::build_graph()
{
    // Class nodes first so that node index == class id.
    for (const auto& c : classes_)
        node_index(c.synset);

    auto link = [this](int child, int parent) {
        auto& ps = parents_[child];
        if (std::find(ps.begin(), ps.end(), parent) != ps.end())
            return;
        ps.push_back(parent);
        adjacency_[child].push_back(parent);
        adjacency_[parent].push_back(child);
    };
    for (const auto& c : classes_)
    {
        int child = c.class_id;
        for (const auto& h : c.hypernyms)
        {
            int parent = node_index(h);
            link(child, parent);
            child = parent;
        }
    }

    // Cycle check over the merged chains (iterative DFS, three colours).
    std::vector<char> colour(node_names_.size(), 0);
    for (std::size_t root = 0; root < node_names_.size(); ++root)
    {
        if (colour[root])
            continue;
        std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(root), 0}};
        colour[root] = 1;
        while (!stack.empty())
        {
            auto& [node, next] = stack.back();
            if (next < parents_[node].size())
            {
                int p = parents_[node][next++];
                if (colour[p] == 1)
                    throw TaxonomyError("hypernym DAG has a cycle through \"" + node_names_[p] + "\"");
                if (colour[p] == 0)
                {
                    colour[p] = 1;
                    stack.emplace_back(p, 0);
                }
            }
            else
            {
                colour[node] = 2;
                stack.pop_back();
            }
        }
    }
}

Taxonomy Taxonomy::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw TaxonomyError("cannot open taxonomy file " + path.string());
    json doc;
    try
    {
        doc = json::parse(in);
    }
    catch (const json::parse_error& e)
    {
        throw TaxonomyError(path.string() + ": " + e.what());
    }
    try
    {
        return from_json(doc);
    }
    catch (const TaxonomyError& e)
    {
        throw TaxonomyError(path.string() + ": " + e.what());
    }
}

Taxonomy Taxonomy::from_json(const json& doc)
{
    if (!doc.is_object())
        throw TaxonomyError("taxonomy document must be a JSON object");
    reject_unknown_keys(doc, {"classes", "datasets"}, "taxonomy");

    const auto& jclasses = require(doc, "classes", "taxonomy");
    if (!jclasses.is_array())
        throw TaxonomyError("classes: expected an array");
    std::vector<ClassEntry> classes;
    classes.reserve(jclasses.size());
    for (std::size_t i = 0; i < jclasses.size(); ++i)
    {
        const auto where = "classes[" + std::to_string(i) + "]";
        const auto& jc = jclasses[i];
        if (!jc.is_object())
            throw TaxonomyError(where + ": expected an object");
        reject_unknown_keys(jc, {"id", "synset", "lemma", "hypernyms"}, where);
        ClassEntry c;
        c.class_id = as_class_id(require(jc, "id", where), where + ".id");
        c.synset = as_string(require(jc, "synset", where), where + ".synset");
        c.lemma = as_string(require(jc, "lemma", where), where + ".lemma");
        const auto& jh = require(jc, "hypernyms", where);
        if (!jh.is_array())
            throw TaxonomyError(where + ".hypernyms: expected an array");
        for (std::size_t k = 0; k < jh.size(); ++k)
            c.hypernyms.push_back(as_string(jh[k], where + ".hypernyms[" + std::to_string(k) + "]"));
        classes.push_back(std::move(c));
    }

    std::map<std::string, DatasetSpec> datasets;
    if (auto it = doc.find("datasets"); it != doc.end())
    {
        if (!it->is_object())
            throw TaxonomyError("datasets: expected an object");
        for (const auto& [name, jspec] : it->items())
        {
            const auto where = "datasets." + name;
            if (!jspec.is_object())
                throw TaxonomyError(where + ": expected an object");
            DatasetSpec spec;
            spec.name = name;
            for (const auto& [super, jmembers] : jspec.items())
            {
                if (!jmembers.is_array())
                    throw TaxonomyError(where + "." + super + ": expected an array of class ids");
                auto& members = spec.superclasses[super];
                for (std::size_t k = 0; k < jmembers.size(); ++k)
                    members.insert(as_class_id(jmembers[k], where + "." + super + "[" + std::to_string(k) + "]"));
            }
            datasets.emplace(name, std::move(spec));
        }
    }
    return Taxonomy(std::move(classes), std::move(datasets));
}

json Taxonomy::to_json() const
{
    json jclasses = json::array();
    for (const auto& c : classes_)
        jclasses.push_back({{"id", c.class_id}, {"synset", c.synset}, {"lemma", c.lemma}, {"hypernyms", c.hypernyms}});
    json jdatasets = json::object();
    for (const auto& [name, spec] : datasets_)
    {
        json js = json::object();
        for (const auto& [super, members] : spec.superclasses)
            js[super] = std::vector<ClassId>(members.begin(), members.end());
        jdatasets[name] = std::move(js);
    }
    return {{"classes", std::move(jclasses)}, {"datasets", std::move(jdatasets)}};
}

void Taxonomy::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw TaxonomyError("cannot write taxonomy file " + path.string());
    out << to_json().dump(1) << '\n';
}

bool Taxonomy::contains(ClassId id) const
{
    return id >= 0 && static_cast<std::size_t>(id) < classes_.size();
}

const ClassEntry& Taxonomy::entry(ClassId id) const
{
    if (!contains(id))
        throw TaxonomyError("unknown class id " + std::to_string(id));
    return classes_[id];
}

std::optional<ClassId> Taxonomy::find_synset(std::string_view synset) const
{
    if (auto it = by_synset_.find(std::string(synset)); it != by_synset_.end())
        return it->second;
    return std::nullopt;
}

std::vector<ClassId> Taxonomy::find_lemma(std::string_view lemma) const
{
    const auto key = normalize_name(lemma);
    std::vector<ClassId> out;
    for (const auto& c : classes_)
    {
        if (normalize_name(c.lemma) == key)
            out.push_back(c.class_id);
    }
    return out;
}

bool Taxonomy::has_dataset(std::string_view name) const
{
    return datasets_.find(std::string(name)) != datasets_.end();
}

const DatasetSpec& Taxonomy::dataset(std::string_view name) const
{
    auto it = datasets_.find(std::string(name));
    if (it == datasets_.end())
        throw TaxonomyError("unknown dataset \"" + std::string(name) + "\"");
    return it->second;
}

std::string Taxonomy::prompt_for(ClassId id) const
{
    return normalize_name(entry(id).lemma);
}

std::optional<std::string> Taxonomy::superclass_of(ClassId id, std::string_view dataset_name) const
{
    const auto& c = entry(id);
    const auto& spec = dataset(dataset_name);
    for (const auto& [super, members] : spec.superclasses)
    {
        if (members.count(id))
            return super;
    }
    for (const auto& h : c.hypernyms)
    {
        const auto key = normalize_name(h);
        for (const auto& [super, _] : spec.superclasses)
        {
            if (normalize_name(super) == key)
                return super;
        }
    }
    return std::nullopt;
}

ErrorKind Taxonomy::error_kind(ClassId prediction, ClassId truth, std::string_view dataset_name,
                               OutOfDatasetPolicy policy) const
{
    auto truth_super = superclass_of(truth, dataset_name);
    if (!truth_super)
        throw TaxonomyError("ground truth class " + std::to_string(truth) + " has no super-class in dataset \"" +
                            std::string(dataset_name) + "\"");
    if (prediction == truth)
        return ErrorKind::Correct;
    auto pred_super = superclass_of(prediction, dataset_name);
    if (!pred_super)
        return policy == OutOfDatasetPolicy::TreatAsInter ? ErrorKind::Inter : ErrorKind::Intra;
    return *pred_super == *truth_super ? ErrorKind::Intra : ErrorKind::Inter;
}

double Taxonomy::path_similarity(ClassId a, ClassId b) const
{
    entry(a);
    entry(b);
    if (a == b)
        return 1.0;
    std::vector<int> dist(node_names_.size(), -1);
    std::deque<int> queue{a};
    dist[a] = 0;
    while (!queue.empty())
    {
        int node = queue.front();
        queue.pop_front();
        for (int next : adjacency_[node])
        {
            if (dist[next] >= 0)
                continue;
            dist[next] = dist[node] + 1;
            if (next == b)
                return 1.0 / (1.0 + dist[next]);
            queue.push_back(next);
        }
    }
    return 0.0;
}

std::set<std::string> Taxonomy::hyponyms_of(std::string_view category) const
{
    auto it = node_ids_.find(std::string(category));
    if (it == node_ids_.end())
        return {};
    std::vector<std::vector<int>> children(node_names_.size());
    for (std::size_t n = 0; n < parents_.size(); ++n)
        for (int p : parents_[n])
            children[p].push_back(static_cast<int>(n));
    std::set<std::string> out;
    std::vector<int> stack{it->second};
    while (!stack.empty())
    {
        int node = stack.back();
        stack.pop_back();
        for (int c : children[node])
        {
            if (out.insert(node_names_[c]).second)
                stack.push_back(c);
        }
    }
    return out;
}

std::set<std::string> Taxonomy::hypernyms_of(std::string_view category) const
{
    auto it = node_ids_.find(std::string(category));
    if (it == node_ids_.end())
        return {};
    std::set<std::string> out;
    std::vector<int> stack{it->second};
    while (!stack.empty())
    {
        int node = stack.back();
        stack.pop_back();
        for (int p : parents_[node])
        {
            if (out.insert(node_names_[p]).second)
                stack.push_back(p);
        }
    }
    return out;
}

} // namespace stcert
