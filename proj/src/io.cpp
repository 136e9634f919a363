#include "qgw/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace qgw::io {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
    throw IoError(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(line);
    while (std::getline(in, token, sep)) {
        const auto begin = token.find_first_not_of(" \t\r");
        const auto end = token.find_last_not_of(" \t\r");
        out.push_back(begin == std::string::npos ? "" : token.substr(begin, end - begin + 1));
    }
    return out;
}

bool parse_double(const std::string& token, double& out) {
    if (token.empty()) return false;
    char* end = nullptr;
    out = std::strtod(token.c_str(), &end);
    return end == token.c_str() + token.size();
}

bool parse_index(const std::string& token, idx& out) {
    if (token.empty()) return false;
    char* end = nullptr;
    out = static_cast<idx>(std::strtoll(token.c_str(), &end, 10));
    return end == token.c_str() + token.size();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

PointCloudData read_point_csv(const std::string& path) {
    auto in = open_input(path);
    PointCloudData data;
    std::string line;
    std::size_t line_no = 0;

    enum class Role { coordinate, feature, label, weight };
    std::vector<Role> roles;
    bool roles_known = false;

    std::vector<double> coord_row;
    std::vector<double> feat_row;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto tokens = split(line, ',');
        if (!roles_known) {
            bool numeric = true;
            double tmp;
            for (const auto& t : tokens)
                if (!parse_double(t, tmp)) numeric = false;
            roles.assign(tokens.size(), Role::coordinate);
            if (!numeric) {
                for (std::size_t c = 0; c < tokens.size(); ++c) {
                    if (tokens[c] == "label")
                        roles[c] = Role::label;
                    else if (tokens[c] == "weight")
                        roles[c] = Role::weight;
                    else if (!tokens[c].empty() && tokens[c][0] == 'f')
                        roles[c] = Role::feature;
                }
                roles_known = true;
                continue; // header consumed
            }
            roles_known = true; // headerless: all coordinates
        }
        if (tokens.size() != roles.size()) fail(path, line_no, "inconsistent column count");
        coord_row.clear();
        feat_row.clear();
        for (std::size_t c = 0; c < tokens.size(); ++c) {
            switch (roles[c]) {
            case Role::label:
                data.labels.push_back(tokens[c]);
                break;
            case Role::weight: {
                double w;
                if (!parse_double(tokens[c], w)) fail(path, line_no, "bad weight '" + tokens[c] + "'");
                data.weights.push_back(w);
                break;
            }
            case Role::feature: {
                double v;
                if (!parse_double(tokens[c], v))
                    fail(path, line_no, "bad feature value '" + tokens[c] + "'");
                feat_row.push_back(v);
                break;
            }
            case Role::coordinate: {
                double v;
                if (!parse_double(tokens[c], v))
                    fail(path, line_no, "bad coordinate '" + tokens[c] + "'");
                coord_row.push_back(v);
                break;
            }
            }
        }
        if (data.n == 0) {
            data.dim = static_cast<idx>(coord_row.size());
            data.feat_dim = static_cast<idx>(feat_row.size());
        }
        if (static_cast<idx>(coord_row.size()) != data.dim)
            fail(path, line_no, "inconsistent coordinate count");
        data.coords.insert(data.coords.end(), coord_row.begin(), coord_row.end());
        data.features.insert(data.features.end(), feat_row.begin(), feat_row.end());
        ++data.n;
    }
    if (data.n == 0) throw IoError(path + ": no data rows");
    if (data.dim == 0 && data.feat_dim == 0)
        throw IoError(path + ": no numeric columns");
    return data;
}

GraphData read_edge_list(const std::string& path, idx n_hint) {
    auto in = open_input(path);
    GraphData g;
    std::string line;
    std::size_t line_no = 0;
    idx max_id = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream row(line);
        std::string ut, vt, wt;
        if (!(row >> ut)) continue; // blank
        if (!(row >> vt)) fail(path, line_no, "edge needs two endpoints");
        GraphEdge e;
        if (!parse_index(ut, e.u) || !parse_index(vt, e.v))
            fail(path, line_no, "bad node id");
        if (row >> wt) {
            if (!parse_double(wt, e.w)) fail(path, line_no, "bad edge weight '" + wt + "'");
        }
        std::string extra;
        if (row >> extra) fail(path, line_no, "trailing tokens");
        if (e.u < 0 || e.v < 0) fail(path, line_no, "negative node id");
        max_id = std::max({max_id, e.u, e.v});
        g.edges.push_back(e);
    }
    g.n = std::max(n_hint, max_id + 1);
    if (g.n == 0) throw IoError(path + ": empty graph");
    if (n_hint > 0 && max_id >= n_hint)
        throw IoError(path + ": node id " + std::to_string(max_id) + " outside given count " +
                      std::to_string(n_hint));
    return g;
}

void write_partition(const std::string& path, const PointedPartition& partition) {
    auto out = open_output(path);
    for (idx i = 0; i < partition.ambient_size(); ++i) {
        const int p = partition.block_of(i);
        if (p < 0) continue;
        const int rep = partition.representative(p) == i ? 1 : 0;
        out << i << ' ' << p << ' ' << rep << '\n';
    }
}

PointedPartition read_partition(const std::string& path, const MmSpace& space) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    std::map<idx, vec<idx>> blocks;
    std::map<idx, idx> reps;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string pt, bt, rt;
        if (!(row >> pt)) continue;
        if (!(row >> bt >> rt)) fail(path, line_no, "expected 'point block rep_flag'");
        idx point, block, flag;
        if (!parse_index(pt, point) || !parse_index(bt, block) || !parse_index(rt, flag))
            fail(path, line_no, "bad integer");
        blocks[block].push_back(point);
        if (flag == 1) {
            if (reps.count(block)) fail(path, line_no, "two representatives for one block");
            reps[block] = point;
        } else if (flag != 0) {
            fail(path, line_no, "rep_flag must be 0 or 1");
        }
    }
    if (blocks.empty()) throw IoError(path + ": empty partition");
    std::vector<vec<idx>> block_list;
    std::vector<idx> rep_list;
    idx expect = 0;
    for (auto& [id, members] : blocks) {
        if (id != expect)
            throw IoError(path + ": block ids must be contiguous from 0 (missing " +
                          std::to_string(expect) + ")");
        ++expect;
        auto it = reps.find(id);
        if (it == reps.end())
            throw IoError(path + ": block " + std::to_string(id) + " has no representative");
        block_list.push_back(std::move(members));
        rep_list.push_back(it->second);
    }
    return PointedPartition::from_blocks(space, std::move(block_list), std::move(rep_list));
}

void write_coupling(const std::string& path, const QuantizationCoupling& qc, bool dense_export) {
    auto out = open_output(path);
    out << qc.m_x << ' ' << qc.m_y << ' ' << qc.n_x << ' ' << qc.n_y << '\n';
    for (const auto& g : qc.global)
        out << "G " << g.i << ' ' << g.j << ' ' << format_double(g.mass) << '\n';
    for (std::size_t k = 0; k < qc.global.size(); ++k) {
        out << "L " << qc.global[k].i << ' ' << qc.global[k].j << '\n';
        for (const auto& e : qc.locals[k].entries)
            out << e.i << ' ' << e.j << ' ' << format_double(e.mass) << '\n';
    }
    if (dense_export) {
        if (qc.n_x * qc.n_y > 1000000)
            throw ValidationError("dense export capped at 10^6 cells");
        const auto& px = *qc.source_partition;
        const auto& py = *qc.target_partition;
        std::vector<PlanEntry> dense;
        for (std::size_t k = 0; k < qc.global.size(); ++k) {
            const auto& ux = px.block(static_cast<int>(qc.global[k].i));
            const auto& vy = py.block(static_cast<int>(qc.global[k].j));
            for (const auto& e : qc.locals[k].entries)
                dense.push_back({ux[static_cast<std::size_t>(e.i)],
                                 vy[static_cast<std::size_t>(e.j)],
                                 qc.global[k].mass * e.mass});
        }
        std::sort(dense.begin(), dense.end(), [](const PlanEntry& a, const PlanEntry& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        for (const auto& e : dense)
            out << "D " << e.i << ' ' << e.j << ' ' << format_double(e.mass) << '\n';
    }
}

RawCoupling read_coupling(const std::string& path) {
    auto in = open_input(path);
    RawCoupling raw;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    ++line_no;
    {
        std::istringstream head(line);
        if (!(head >> raw.m_x >> raw.m_y >> raw.n_x >> raw.n_y))
            fail(path, line_no, "bad header (want 'm_X m_Y N_X N_Y')");
    }
    SparsePlan* current = nullptr;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string first;
        if (!(row >> first)) continue;
        if (first == "G") {
            PlanEntry e;
            std::string it, jt, mt;
            if (!(row >> it >> jt >> mt)) fail(path, line_no, "bad global triplet");
            if (!parse_index(it, e.i) || !parse_index(jt, e.j) || !parse_double(mt, e.mass))
                fail(path, line_no, "bad global triplet");
            raw.global.push_back(e);
            current = nullptr;
        } else if (first == "L") {
            idx p, q;
            std::string pt, qt;
            if (!(row >> pt >> qt)) fail(path, line_no, "bad local header");
            if (!parse_index(pt, p) || !parse_index(qt, q)) fail(path, line_no, "bad local header");
            const std::size_t at = raw.locals.size();
            if (at >= raw.global.size() || raw.global[at].i != p || raw.global[at].j != q)
                fail(path, line_no, "local sections must follow the global support order");
            raw.locals.emplace_back();
            current = &raw.locals.back();
        } else if (first == "D") {
            current = nullptr; // dense export is advisory; structure lives in G/L
        } else {
            if (current == nullptr) fail(path, line_no, "triplet outside a local section");
            PlanEntry e;
            std::string jt, mt;
            if (!(row >> jt >> mt)) fail(path, line_no, "bad local triplet");
            if (!parse_index(first, e.i) || !parse_index(jt, e.j) || !parse_double(mt, e.mass))
                fail(path, line_no, "bad local triplet");
            current->entries.push_back(e);
        }
    }
    if (raw.locals.size() != raw.global.size())
        throw IoError(path + ": local sections do not match the global support");
    return raw;
}

QuantizationCoupling attach_partitions(RawCoupling raw,
                                       std::shared_ptr<const PointedPartition> source,
                                       std::shared_ptr<const PointedPartition> target) {
    if (source->m() != raw.m_x || target->m() != raw.m_y)
        throw ValidationError("partition block counts do not match the coupling header");
    if (source->ambient_size() != raw.n_x || target->ambient_size() != raw.n_y)
        throw ValidationError("partition sizes do not match the coupling header");
    QuantizationCoupling qc;
    qc.n_x = raw.n_x;
    qc.n_y = raw.n_y;
    qc.m_x = raw.m_x;
    qc.m_y = raw.m_y;
    qc.global = std::move(raw.global);
    qc.locals = std::move(raw.locals);
    qc.source_partition = std::move(source);
    qc.target_partition = std::move(target);
    return qc;
}

std::vector<idx> read_index_file(const std::string& path) {
    auto in = open_input(path);
    std::vector<idx> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string token;
        if (!(row >> token)) continue;
        idx value;
        if (!parse_index(token, value)) fail(path, line_no, "bad integer '" + token + "'");
        out.push_back(value);
    }
    if (out.empty()) throw IoError(path + ": empty index file");
    return out;
}

vec<double> read_color_csv(const std::string& path, idx expected_n) {
    auto in = open_input(path);
    vec<double> colors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto tokens = split(line, ',');
        if (tokens.size() != 3) fail(path, line_no, "expected three color components");
        for (const auto& t : tokens) {
            double v;
            if (!parse_double(t, v)) fail(path, line_no, "bad color value '" + t + "'");
            colors.push_back(v);
        }
    }
    if (static_cast<idx>(colors.size()) != expected_n * 3)
        throw IoError(path + ": expected " + std::to_string(expected_n) + " color rows");
    return colors;
}

void write_color_csv(const std::string& path, const vec<double>& colors) {
    auto out = open_output(path);
    for (std::size_t i = 0; i + 2 < colors.size(); i += 3)
        out << format_double(colors[i]) << ',' << format_double(colors[i + 1]) << ','
            << format_double(colors[i + 2]) << '\n';
}

std::string report_json(const MatchReport& report, std::uint64_t seed, int threads) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["algorithm"] = report.algorithm;
    j["sizes"] = {{"n_x", report.n_x}, {"n_y", report.n_y}, {"m_x", report.m_x},
                  {"m_y", report.m_y}};
    j["params"] = {{"alpha", report.alpha},
                   {"beta", report.beta},
                   {"support_threshold", report.support_threshold},
                   {"inner", report.inner},
                   {"epsilon", report.epsilon},
                   {"seed", seed},
                   {"threads", threads}};
    j["global"] = {{"loss", report.global_loss},
                   {"iterations", report.global_iterations},
                   {"inner_converged", report.inner_converged},
                   {"support_size", report.support_size}};
    if (report.full_gw_loss)
        j["full_gw_loss"] = *report.full_gw_loss;
    else
        j["full_gw_loss"] = nullptr;
    if (report.distortion_bound) {
        j["bounds"] = {{"q_px", *report.q_px},
                       {"q_py", *report.q_py},
                       {"eps_x", *report.eps_x},
                       {"eps_y", *report.eps_y},
                       {"thm3_bound", *report.distortion_bound}};
    } else if (report.q_px) {
        j["bounds"] = {{"q_px", *report.q_px}, {"q_py", *report.q_py}};
    } else {
        j["bounds"] = nullptr;
    }
    j["metric_interpretation"] = report.metric_interpretation;
    j["coupling"] = {{"nnz", report.coupling_nnz}, {"support_bound", report.support_bound}};
    j["partition_stats"] = {{"min_block_x", report.min_block_x},
                            {"max_block_x", report.max_block_x},
                            {"min_block_y", report.min_block_y},
                            {"max_block_y", report.max_block_y}};
    j["local_feature"] = {{"exact", report.local_feature_exact},
                          {"profile", report.local_feature_profile}};
    j["timings"] = {{"quantize_seconds", report.quantize_seconds},
                    {"global_seconds", report.global_seconds},
                    {"local_seconds", report.local_seconds},
                    {"assemble_seconds", report.assemble_seconds},
                    {"bounds_seconds", report.bounds_seconds},
                    {"total_seconds", report.total_seconds}};
    return j.dump(2) + "\n";
}

} // namespace qgw::io
