#include "heco/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "heco/errors.hpp"

namespace fs = std::filesystem;

namespace heco {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Line {
    std::string file;
    int number;
    std::vector<std::string> tokens;

    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError(file + ":" + std::to_string(number) + ": " + msg);
    }
};

// key/value text rows; '#' starts a comment, blank lines skipped
std::vector<Line> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<Line> rows;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        Line line{path, number, {}};
        std::string tok;
        while (ls >> tok) line.tokens.push_back(tok);
        if (!line.tokens.empty()) rows.push_back(std::move(line));
    }
    return rows;
}

int parse_int(const Line& line, const std::string& tok) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        line.fail("expected an integer, got '" + tok + "'");
    }
}

double parse_double(const Line& line, const std::string& tok) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        line.fail("expected a number, got '" + tok + "'");
    }
}

DenseMatrix read_feature_file(const std::string& path) {
    auto rows = read_rows(path);
    if (rows.empty()) throw DataError(path + ": empty feature file");
    const auto& head = rows[0];
    if (head.tokens.size() != 2) head.fail("expected header 'n d'");
    const int n = parse_int(head, head.tokens[0]);
    const int d = parse_int(head, head.tokens[1]);
    if (n < 0 || d <= 0) head.fail("bad feature dimensions");
    if (rows.size() != static_cast<std::size_t>(n) + 1)
        throw DataError(path + ": expected " + std::to_string(n) + " feature rows, got " +
                        std::to_string(rows.size() - 1));
    DenseMatrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    for (int r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r) + 1];
        if (row.tokens.size() != static_cast<std::size_t>(d)) row.fail("wrong value count");
        for (int c = 0; c < d; ++c)
            m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                parse_double(row, row.tokens[static_cast<std::size_t>(c)]);
    }
    return m;
}

MetaPathSpec parse_metapath_name(const std::string& name, const HeteroGraphData& data) {
    MetaPathSpec spec;
    spec.name = name;
    if (name.size() < 3) throw DataError("meta-path '" + name + "' too short");
    auto type_of = [&](char c) -> TypeId {
        const std::string letter(1, c);
        for (std::size_t t = 0; t < data.type_names.size(); ++t)
            if (data.type_names[t] == letter) return static_cast<TypeId>(t);
        throw DataError("meta-path '" + name + "' uses undeclared type '" + letter + "'");
    };
    for (std::size_t k = 0; k + 1 < name.size(); ++k) {
        const TypeId a = type_of(name[k]);
        const TypeId b = type_of(name[k + 1]);
        int found = -1;
        bool forward = true;
        for (std::size_t r = 0; r < data.relations.size(); ++r) {
            const auto& rel = data.relations[r];
            const bool fwd = rel.src_type == a && rel.dst_type == b;
            const bool bwd = rel.src_type == b && rel.dst_type == a;
            if (fwd || bwd) {
                if (found >= 0)
                    throw DataError("meta-path '" + name + "': relation between " +
                                    data.type_names[a] + " and " + data.type_names[b] +
                                    " is ambiguous");
                found = static_cast<int>(r);
                forward = fwd;
            }
        }
        if (found < 0)
            throw DataError("meta-path '" + name + "': no relation between " + data.type_names[a] +
                            " and " + data.type_names[b]);
        spec.chain.push_back({static_cast<std::size_t>(found), forward});
    }
    return spec;
}

}  // namespace

LoadedDataset load_dataset(const std::string& dir) {
    const std::string manifest = (fs::path(dir) / "manifest.txt").string();
    auto rows = read_rows(manifest);

    std::string target_letter, nodes_file, labels_file;
    std::vector<std::tuple<std::string, std::string, std::string>> relation_rows;
    std::map<std::string, std::string> feature_files;
    std::vector<std::string> metapath_names;

    for (const auto& line : rows) {
        const auto& key = line.tokens[0];
        if (key == "target" && line.tokens.size() == 2) {
            target_letter = line.tokens[1];
        } else if (key == "nodes" && line.tokens.size() == 2) {
            nodes_file = line.tokens[1];
        } else if (key == "labels" && line.tokens.size() == 2) {
            labels_file = line.tokens[1];
        } else if (key == "relation" && line.tokens.size() == 4) {
            relation_rows.emplace_back(line.tokens[1], line.tokens[2], line.tokens[3]);
        } else if (key == "features" && line.tokens.size() == 3) {
            feature_files[line.tokens[1]] = line.tokens[2];
        } else if (key == "metapath" && line.tokens.size() == 2) {
            metapath_names.push_back(line.tokens[1]);
        } else {
            line.fail("unknown manifest entry '" + key + "'");
        }
    }
    if (target_letter.empty() || nodes_file.empty() || labels_file.empty())
        throw DataError(manifest + ": target, nodes and labels entries are required");

    HeteroGraphData data;
    std::map<std::string, TypeId> type_ids;
    auto intern_type = [&](const std::string& letter, const Line& line) {
        if (letter.size() != 1) line.fail("type names must be single letters, got '" + letter + "'");
        auto it = type_ids.find(letter);
        if (it != type_ids.end()) return it->second;
        const TypeId t = static_cast<TypeId>(data.type_names.size());
        type_ids[letter] = t;
        data.type_names.push_back(letter);
        data.type_counts.push_back(0);
        return t;
    };

    // nodes: "<local id> <type letter>", ids dense per type
    std::vector<std::vector<char>> seen_ids;
    for (const auto& line : read_rows((fs::path(dir) / nodes_file).string())) {
        if (line.tokens.size() != 2) line.fail("expected 'id type'");
        const int id = parse_int(line, line.tokens[0]);
        const TypeId t = intern_type(line.tokens[1], line);
        if (static_cast<std::size_t>(t) >= seen_ids.size()) seen_ids.resize(t + 1);
        if (id < 0) line.fail("negative node id");
        auto& seen = seen_ids[t];
        if (static_cast<std::size_t>(id) >= seen.size()) seen.resize(id + 1, 0);
        if (seen[id]) line.fail("duplicate node id " + std::to_string(id) + " for type " + line.tokens[1]);
        seen[id] = 1;
        ++data.type_counts[t];
    }
    for (std::size_t t = 0; t < seen_ids.size(); ++t) {
        for (std::size_t i = 0; i < seen_ids[t].size(); ++i)
            if (!seen_ids[t][i])
                throw DataError(nodes_file + ": ids of type " + data.type_names[t] +
                                " are not dense, missing " + std::to_string(i));
    }
    auto target_it = type_ids.find(target_letter);
    if (target_it == type_ids.end())
        throw DataError(manifest + ": target type '" + target_letter + "' has no nodes");
    data.target_type = target_it->second;

    // relations with per-file dangling-endpoint checks
    for (const auto& [src_letter, dst_letter, file] : relation_rows) {
        auto src_it = type_ids.find(src_letter);
        auto dst_it = type_ids.find(dst_letter);
        if (src_it == type_ids.end() || dst_it == type_ids.end())
            throw DataError(manifest + ": relation references unknown type " + src_letter + "-" +
                            dst_letter);
        RelationSpec rel;
        rel.src_type = src_it->second;
        rel.dst_type = dst_it->second;
        for (const auto& line : read_rows((fs::path(dir) / file).string())) {
            if (line.tokens.size() != 2) line.fail("expected 'src dst'");
            const int s = parse_int(line, line.tokens[0]);
            const int d = parse_int(line, line.tokens[1]);
            if (s < 0 || s >= data.type_counts[rel.src_type])
                line.fail("dangling edge endpoint " + std::to_string(s) + " of type " + src_letter);
            if (d < 0 || d >= data.type_counts[rel.dst_type])
                line.fail("dangling edge endpoint " + std::to_string(d) + " of type " + dst_letter);
            rel.edges.emplace_back(s, d);
        }
        data.relations.push_back(std::move(rel));
    }

    data.features.resize(data.type_names.size());
    for (const auto& [letter, file] : feature_files) {
        auto it = type_ids.find(letter);
        if (it == type_ids.end())
            throw DataError(manifest + ": features for unknown type '" + letter + "'");
        data.features[it->second] = read_feature_file((fs::path(dir) / file).string());
    }

    // labels for the target type
    std::vector<int> labels(data.type_counts[data.target_type], -1);
    for (const auto& line : read_rows((fs::path(dir) / labels_file).string())) {
        if (line.tokens.size() != 2) line.fail("expected 'id class'");
        const int id = parse_int(line, line.tokens[0]);
        const int cls = parse_int(line, line.tokens[1]);
        if (id < 0 || id >= data.type_counts[data.target_type]) line.fail("label for unknown target node");
        if (cls < 0) line.fail("negative class id");
        if (labels[id] != -1) line.fail("duplicate label for node " + std::to_string(id));
        labels[id] = cls;
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == -1)
            throw DataError(labels_file + ": target node " + std::to_string(i) + " has no label");

    std::vector<MetaPathSpec> metapaths;
    for (const auto& name : metapath_names) metapaths.push_back(parse_metapath_name(name, data));

    return LoadedDataset{HeteroGraph(std::move(data)), std::move(labels), std::move(metapaths)};
}

void write_dataset(const std::string& dir, const HeteroGraph& g, const std::vector<int>& labels,
                   const std::vector<MetaPathSpec>& metapaths, bool write_all_features) {
    fs::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw DataError("cannot write " + (fs::path(dir) / name).string());
        return out;
    };

    {
        auto out = open("nodes.txt");
        for (std::size_t t = 0; t < g.num_types(); ++t)
            for (NodeId i = 0; i < g.count(static_cast<TypeId>(t)); ++i)
                out << i << "\t" << g.type_name(static_cast<TypeId>(t)) << "\n";
    }
    std::vector<std::string> relation_files;
    std::set<std::string> used_names;
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
        const auto& rel = g.relation(r);
        std::string name = "edges_" + g.type_name(rel.src_type) + g.type_name(rel.dst_type);
        if (!used_names.insert(name).second) name += "_" + std::to_string(r);
        used_names.insert(name);
        name += ".txt";
        relation_files.push_back(name);
        auto out = open(name);
        for (const auto& [s, d] : rel.edges) out << s << "\t" << d << "\n";
    }
    std::vector<std::pair<std::string, std::string>> feature_entries;
    for (std::size_t t = 0; t < g.num_types(); ++t) {
        if (!write_all_features && static_cast<TypeId>(t) != g.target_type()) continue;
        const std::string name = "features_" + g.type_name(static_cast<TypeId>(t)) + ".txt";
        feature_entries.emplace_back(g.type_name(static_cast<TypeId>(t)), name);
        const auto& f = g.features(static_cast<TypeId>(t));
        auto out = open(name);
        out << f.rows << " " << f.cols << "\n";
        for (std::size_t r = 0; r < f.rows; ++r) {
            for (std::size_t c = 0; c < f.cols; ++c) {
                if (c) out << " ";
                out << fmt_double(f.at(r, c));
            }
            out << "\n";
        }
    }
    {
        auto out = open("labels.txt");
        for (std::size_t i = 0; i < labels.size(); ++i) out << i << "\t" << labels[i] << "\n";
    }
    {
        auto out = open("manifest.txt");
        out << "target " << g.type_name(g.target_type()) << "\n";
        out << "nodes nodes.txt\n";
        out << "labels labels.txt\n";
        for (std::size_t r = 0; r < g.num_relations(); ++r) {
            const auto& rel = g.relation(r);
            out << "relation " << g.type_name(rel.src_type) << " " << g.type_name(rel.dst_type)
                << " " << relation_files[r] << "\n";
        }
        for (const auto& [letter, file] : feature_entries)
            out << "features " << letter << " " << file << "\n";
        for (const auto& mp : metapaths) out << "metapath " << mp.name << "\n";
    }
}

LoadedDataset generate_synthetic(const SynthSpec& spec) {
    if (spec.classes < 1 || spec.nodes_per_class < 1)
        throw ConfigError("synthetic spec needs at least one target node");
    if (spec.intra <= 0.0 || spec.intra > 1.0) throw ConfigError("intra affinity must be in (0,1]");
    if (spec.cross < 0.0 || spec.cross > 1.0) throw ConfigError("cross affinity must be in [0,1]");
    if (spec.feat_dim < 1) throw ConfigError("feature dimension must be >= 1");
    if (spec.noise < 0.0) throw ConfigError("noise scale must be >= 0");
    if (spec.cardinalities.empty()) throw ConfigError("need at least one neighbor type");
    for (int card : spec.cardinalities)
        if (card < spec.classes)
            throw ConfigError("neighbor type cardinality must be >= class count");

    const int n_target = spec.classes * spec.nodes_per_class;
    const std::string letters = "ABCDEFGHIJKLMNOQRSTUVWXYZ";  // target is P
    if (spec.cardinalities.size() > letters.size())
        throw ConfigError("too many neighbor types");

    Rng rng(spec.seed);

    HeteroGraphData data;
    data.type_names.push_back("P");
    data.type_counts.push_back(n_target);
    for (std::size_t m = 0; m < spec.cardinalities.size(); ++m) {
        data.type_names.push_back(std::string(1, letters[m]));
        data.type_counts.push_back(spec.cardinalities[m]);
    }
    data.target_type = 0;

    std::vector<int> labels(n_target);
    for (int i = 0; i < n_target; ++i) labels[i] = i / spec.nodes_per_class;

    // class profile vectors for target features
    DenseMatrix means(spec.classes, spec.feat_dim);
    for (std::size_t i = 0; i < means.v.size(); ++i) means.v[i] = rng.normal();

    for (std::size_t m = 0; m < spec.cardinalities.size(); ++m) {
        const int card = spec.cardinalities[m];
        RelationSpec rel;
        rel.src_type = 0;
        rel.dst_type = static_cast<TypeId>(m + 1);
        for (int i = 0; i < n_target; ++i) {
            const int c = labels[i];
            bool any = false;
            for (int v = 0; v < card; ++v) {
                const double p = (v % spec.classes == c) ? spec.intra : spec.cross;
                if (rng.bernoulli(p)) {
                    rel.edges.emplace_back(i, v);
                    any = true;
                }
            }
            if (!any) {
                // keep every target attached to its class pool
                const int pool = (card - 1 - c) / spec.classes + 1;
                rel.edges.emplace_back(i, c + spec.classes * static_cast<int>(rng.index(pool)));
            }
        }
        data.relations.push_back(std::move(rel));
    }

    data.features.resize(data.type_names.size());
    DenseMatrix feat(n_target, spec.feat_dim);
    for (int i = 0; i < n_target; ++i)
        for (int c = 0; c < spec.feat_dim; ++c)
            feat.at(i, c) = means.at(labels[i], c) + spec.noise * rng.normal();
    data.features[0] = std::move(feat);

    std::vector<MetaPathSpec> metapaths;
    for (std::size_t m = 0; m < spec.cardinalities.size(); ++m) {
        MetaPathSpec mp;
        mp.name = std::string("P") + letters[m] + "P";
        mp.chain = {{m, true}, {m, false}};
        metapaths.push_back(std::move(mp));
    }

    return LoadedDataset{HeteroGraph(std::move(data)), std::move(labels), std::move(metapaths)};
}

void save_embeddings(const std::string& path, const EmbeddingMatrix& emb) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write embeddings: " + path);
    out << "heco-embedding v1 view=" << emb.view << " epoch=" << emb.epoch
        << " config=" << (emb.config_hash.empty() ? "none" : emb.config_hash) << "\n";
    out << emb.m.rows << " " << emb.m.cols << "\n";
    for (std::size_t r = 0; r < emb.m.rows; ++r) {
        for (std::size_t c = 0; c < emb.m.cols; ++c) {
            if (c) out << " ";
            out << fmt_double(emb.m.at(r, c));
        }
        out << "\n";
    }
}

EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read embeddings: " + path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "heco-embedding" || version != "v1")
        throw DataError("embedding format version mismatch in " + path);
    EmbeddingMatrix emb;
    std::string kv;
    while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError("bad embedding header field '" + kv + "'");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "view")
            emb.view = val;
        else if (key == "epoch")
            emb.epoch = std::stoi(val);
        else if (key == "config")
            emb.config_hash = val == "none" ? "" : val;
        else
            throw DataError("unknown embedding header field '" + key + "'");
    }
    std::size_t n = 0, d = 0;
    if (!(in >> n >> d)) throw DataError(path + ": missing embedding dimensions");
    emb.m = DenseMatrix(n, d);
    for (std::size_t i = 0; i < n * d; ++i)
        if (!(in >> emb.m.v[i])) throw DataError(path + ": truncated embedding values");
    return emb;
}

void save_split(const std::string& path, const Split& split) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split: " + path);
    out << "heco-split v1\n";
    out << "labels_per_class " << split.labels_per_class << "\n";
    auto write = [&](const char* name, const std::vector<NodeId>& ids) {
        out << name << " " << ids.size();
        for (NodeId id : ids) out << " " << id;
        out << "\n";
    };
    write("train", split.train);
    write("val", split.val);
    write("test", split.test);
}

Split load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read split: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "heco-split v1") throw DataError("split format version mismatch in " + path);
    Split split;
    std::string key;
    while (in >> key) {
        if (key == "labels_per_class") {
            in >> split.labels_per_class;
        } else if (key == "train" || key == "val" || key == "test") {
            std::size_t n;
            if (!(in >> n)) throw DataError(path + ": truncated split");
            auto& ids = key == "train" ? split.train : key == "val" ? split.val : split.test;
            ids.resize(n);
            for (auto& id : ids)
                if (!(in >> id)) throw DataError(path + ": truncated split ids");
        } else {
            throw DataError(path + ": unknown split field '" + key + "'");
        }
    }
    return split;
}

}  // namespace heco
