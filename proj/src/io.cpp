#include "mipose/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mipose::io {

using nlohmann::json;

namespace {

std::string dtos(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double stod_exact(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc())
        throw DataError("invalid numeric field: '" + s + "'");
    return v;
}

json transform_to_json(const RigidTransform& t) {
    return json{{"q", {t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()}},
                {"t", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const json& j) {
    const auto& q = j.at("q");
    const auto& t = j.at("t");
    return RigidTransform(Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                               q[3].get<double>()),
                          Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()));
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw DataError("cannot open: " + path.string());
    return in;
}

void atomic_replace(const fs::path& tmp, const fs::path& path) {
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string());
}

}  // namespace

void write_text_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        auto out = open_out(tmp, std::ios::binary);
        out.write(content.data(), (std::streamsize)content.size());
    }
    atomic_replace(tmp, path);
}

std::string read_text(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- PLY ---------------------------------------------------------------------

void save_ply(const fs::path& path, const std::vector<Vec3>& vertices,
              const std::vector<Vec3>& normals,
              const std::vector<std::array<int, 3>>& triangles) {
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property float nx\nproperty float ny\nproperty float nz\n";
    out << "element face " << triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Vec3& v = vertices[i];
        const Vec3 n = i < normals.size() ? normals[i] : Vec3(0, 0, 1);
        out << dtos(v.x()) << ' ' << dtos(v.y()) << ' ' << dtos(v.z()) << ' ' << dtos(n.x())
            << ' ' << dtos(n.y()) << ' ' << dtos(n.z()) << "\n";
    }
    for (const auto& t : triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
    write_text_atomic(path, out.str());
}

PlyData load_ply(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw DataError("not a PLY file: " + path.string());

    std::size_t n_vertices = 0, n_faces = 0;
    std::vector<std::string> vertex_props;
    std::string current_element;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw DataError("only ASCII PLY is supported");
        } else if (word == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            current_element = name;
            if (name == "vertex") n_vertices = count;
            if (name == "face") n_faces = count;
        } else if (word == "property" && current_element == "vertex") {
            std::string type, name;
            ls >> type >> name;
            vertex_props.push_back(name);
        }
    }

    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    for (int i = 0; i < (int)vertex_props.size(); ++i) {
        const std::string& p = vertex_props[i];
        if (p == "x") ix = i;
        if (p == "y") iy = i;
        if (p == "z") iz = i;
        if (p == "nx") inx = i;
        if (p == "ny") iny = i;
        if (p == "nz") inz = i;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw DataError("PLY lacks vertex positions");

    PlyData data;
    data.vertices.reserve(n_vertices);
    std::vector<double> fields(vertex_props.size());
    for (std::size_t v = 0; v < n_vertices; ++v) {
        if (!std::getline(in, line)) throw DataError("PLY truncated in vertices");
        std::istringstream ls(line);
        for (double& f : fields)
            if (!(ls >> f)) throw DataError("PLY vertex parse error");
        data.vertices.emplace_back(fields[ix], fields[iy], fields[iz]);
        if (inx >= 0 && iny >= 0 && inz >= 0)
            data.normals.emplace_back(fields[inx], fields[iny], fields[inz]);
    }
    for (std::size_t f = 0; f < n_faces; ++f) {
        if (!std::getline(in, line)) throw DataError("PLY truncated in faces");
        std::istringstream ls(line);
        int count;
        if (!(ls >> count)) throw DataError("PLY face parse error");
        std::vector<int> idx(count);
        for (int& i : idx)
            if (!(ls >> i)) throw DataError("PLY face parse error");
        // Fan-triangulate polygons.
        for (int i = 1; i + 1 < count; ++i)
            data.triangles.push_back({idx[0], idx[i], idx[i + 1]});
    }
    return data;
}

void save_symmetry(const fs::path& path, const std::vector<RigidTransform>& group) {
    std::ostringstream out;
    for (const RigidTransform& s : group)
        out << dtos(s.rotation.w()) << ' ' << dtos(s.rotation.x()) << ' '
            << dtos(s.rotation.y()) << ' ' << dtos(s.rotation.z()) << ' '
            << dtos(s.translation.x()) << ' ' << dtos(s.translation.y()) << ' '
            << dtos(s.translation.z()) << "\n";
    write_text_atomic(path, out.str());
}

std::vector<RigidTransform> load_symmetry(const fs::path& path) {
    auto in = open_in(path);
    std::vector<RigidTransform> group;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double qw, qx, qy, qz, tx, ty, tz;
        if (!(ls >> qw >> qx >> qy >> qz >> tx >> ty >> tz))
            throw DataError("bad symmetry row in " + path.string());
        group.emplace_back(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz));
    }
    return group;
}

MeshModel load_model(const fs::path& ply_path, int class_id, int sample_count) {
    PlyData data = load_ply(ply_path);
    std::vector<RigidTransform> symmetry;
    const fs::path sym_path = ply_path.string() + ".sym";
    if (fs::exists(sym_path)) symmetry = load_symmetry(sym_path);
    return MeshModel::create(std::move(data.vertices), std::move(data.triangles),
                             std::move(data.normals), class_id, std::move(symmetry),
                             sample_count);
}

std::vector<MeshModel> load_model_set(const fs::path& json_path, int sample_count) {
    const json j = json::parse(read_text(json_path));
    std::vector<MeshModel> models;
    for (const auto& entry : j) {
        fs::path ply = entry.at("ply").get<std::string>();
        if (ply.is_relative()) ply = json_path.parent_path() / ply;
        models.push_back(load_model(ply, entry.at("class_id").get<int>(), sample_count));
    }
    return models;
}

// --- PGM ---------------------------------------------------------------------

namespace {

void write_pgm(const fs::path& path, int width, int height, int maxval,
               const std::vector<std::uint8_t>& bytes) {
    std::ostringstream out;
    out << "P5\n" << width << ' ' << height << "\n" << maxval << "\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), (std::streamsize)bytes.size());
    write_text_atomic(path, out.str());
}

std::vector<std::uint8_t> read_pgm(const fs::path& path, int& width, int& height,
                                   int& maxval) {
    auto in = open_in(path, std::ios::binary);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataError("not a binary PGM: " + path.string());
    const auto next_int = [&] {
        int v;
        while (in >> std::ws && in.peek() == '#') {
            std::string comment;
            std::getline(in, comment);
        }
        if (!(in >> v)) throw DataError("PGM header parse error: " + path.string());
        return v;
    };
    width = next_int();
    height = next_int();
    maxval = next_int();
    in.get();  // single whitespace after maxval
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::vector<std::uint8_t> data(std::size_t(width) * height * bytes_per);
    in.read(reinterpret_cast<char*>(data.data()), (std::streamsize)data.size());
    if ((std::size_t)in.gcount() != data.size())
        throw DataError("PGM truncated: " + path.string());
    return data;
}

}  // namespace

void write_pgm8(const fs::path& path, int width, int height,
                const std::vector<std::uint8_t>& data) {
    write_pgm(path, width, height, 255, data);
}

void write_pgm16(const fs::path& path, int width, int height,
                 const std::vector<std::uint16_t>& data) {
    std::vector<std::uint8_t> bytes(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        bytes[2 * i] = (std::uint8_t)(data[i] >> 8);  // big-endian per PGM
        bytes[2 * i + 1] = (std::uint8_t)(data[i] & 0xff);
    }
    write_pgm(path, width, height, 65535, bytes);
}

std::vector<std::uint8_t> read_pgm8(const fs::path& path, int& width, int& height) {
    int maxval;
    auto data = read_pgm(path, width, height, maxval);
    if (maxval > 255) throw DataError("expected 8-bit PGM: " + path.string());
    return data;
}

std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height) {
    int maxval;
    const auto bytes = read_pgm(path, width, height, maxval);
    if (maxval <= 255) throw DataError("expected 16-bit PGM: " + path.string());
    std::vector<std::uint16_t> data(bytes.size() / 2);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = (std::uint16_t)((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    return data;
}

// --- Rasters -----------------------------------------------------------------

void write_raster(const fs::path& base_path, int width, int height, int channels,
                  const std::vector<float>& data) {
    if (data.size() != std::size_t(width) * height * channels)
        throw DataError("write_raster: size mismatch");
    json header{{"width", width}, {"height", height}, {"channels", channels}};
    write_text_atomic(base_path.string() + ".json", header.dump(2) + "\n");
    std::string raw(data.size() * sizeof(float), '\0');
    std::memcpy(raw.data(), data.data(), raw.size());
    write_text_atomic(base_path.string() + ".raw", raw);
}

std::vector<float> read_raster(const fs::path& base_path, int& width, int& height,
                               int& channels) {
    const json header = json::parse(read_text(base_path.string() + ".json"));
    width = header.at("width").get<int>();
    height = header.at("height").get<int>();
    channels = header.at("channels").get<int>();
    const std::string raw = read_text(base_path.string() + ".raw");
    if (raw.size() != std::size_t(width) * height * channels * sizeof(float))
        throw DataError("raster size mismatch: " + base_path.string());
    std::vector<float> data(std::size_t(width) * height * channels);
    std::memcpy(data.data(), raw.data(), raw.size());
    return data;
}

// --- Depth -------------------------------------------------------------------

void save_depth(const fs::path& dir, const DepthImage& depth, double scale) {
    std::vector<std::uint16_t> units(depth.pixel_count());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const double u = std::round(depth.depth[i] / scale);
        units[i] = (std::uint16_t)std::clamp(u, 0.0, 65535.0);
    }
    write_pgm16(dir / "depth.pgm", depth.width, depth.height, units);
    json header{{"scale", scale}};
    write_text_atomic(dir / "depth.json", header.dump(2) + "\n");
}

DepthImage load_depth(const fs::path& dir) {
    const json header = json::parse(read_text(dir / "depth.json"));
    const double scale = header.at("scale").get<double>();
    int w, h;
    const auto units = read_pgm16(dir / "depth.pgm", w, h);
    DepthImage depth(w, h);
    for (std::size_t i = 0; i < units.size(); ++i) depth.depth[i] = units[i] * scale;
    return depth;
}

// --- Scenes ------------------------------------------------------------------

void save_scene(const fs::path& dir, const GroundTruthScene& gt, const PredictionMaps& maps) {
    fs::create_directories(dir);
    json j;
    j["seed"] = gt.seed;
    j["camera"] = {{"fx", gt.cam.fx}, {"fy", gt.cam.fy}, {"cx", gt.cam.cx},
                   {"cy", gt.cam.cy}, {"width", gt.cam.width}, {"height", gt.cam.height}};
    json placements = json::array();
    for (const Placement& p : gt.placements) {
        json pj = transform_to_json(p.pose);
        pj["class_id"] = p.class_id;
        pj["instance_id"] = p.instance_id;
        placements.push_back(pj);
    }
    j["placements"] = placements;
    write_text_atomic(dir / "scene.json", j.dump(2) + "\n");

    save_depth(dir, gt.depth);

    const int w = gt.depth.width, h = gt.depth.height;
    std::vector<std::uint8_t> cls(gt.class_labels.size()), inst(gt.instance_labels.size()),
        boundary(gt.boundary_mask.size());
    for (std::size_t i = 0; i < cls.size(); ++i)
        cls[i] = (std::uint8_t)std::clamp(gt.class_labels[i], 0, 255);
    for (std::size_t i = 0; i < inst.size(); ++i)
        inst[i] = (std::uint8_t)std::clamp(gt.instance_labels[i] + 1, 0, 255);
    for (std::size_t i = 0; i < boundary.size(); ++i)
        boundary[i] = gt.boundary_mask[i] ? 255 : 0;
    write_pgm8(dir / "class_labels.pgm", w, h, cls);
    write_pgm8(dir / "instance_labels.pgm", w, h, inst);
    write_pgm8(dir / "boundary.pgm", w, h, boundary);

    save_prediction_maps(dir, maps);
}

void save_prediction_maps(const fs::path& dir, const PredictionMaps& maps) {
    fs::create_directories(dir);
    write_raster(dir / "semantic", maps.width, maps.height, maps.num_classes + 1,
                 maps.semantic);
    write_raster(dir / "boundary_prob", maps.width, maps.height, 1, maps.boundary);
}

GroundTruthScene load_scene_gt(const fs::path& dir) {
    const json j = json::parse(read_text(dir / "scene.json"));
    GroundTruthScene gt;
    gt.seed = j.at("seed").get<std::uint64_t>();
    const json& cam = j.at("camera");
    gt.cam.fx = cam.at("fx").get<double>();
    gt.cam.fy = cam.at("fy").get<double>();
    gt.cam.cx = cam.at("cx").get<double>();
    gt.cam.cy = cam.at("cy").get<double>();
    gt.cam.width = cam.at("width").get<int>();
    gt.cam.height = cam.at("height").get<int>();
    for (const auto& pj : j.at("placements")) {
        Placement p;
        p.class_id = pj.at("class_id").get<int>();
        p.instance_id = pj.at("instance_id").get<int>();
        p.pose = transform_from_json(pj);
        gt.placements.push_back(p);
    }
    gt.depth = load_depth(dir);
    int w, h;
    const auto cls = read_pgm8(dir / "class_labels.pgm", w, h);
    const auto inst = read_pgm8(dir / "instance_labels.pgm", w, h);
    const auto boundary = read_pgm8(dir / "boundary.pgm", w, h);
    gt.class_labels.assign(cls.begin(), cls.end());
    gt.instance_labels.resize(inst.size());
    for (std::size_t i = 0; i < inst.size(); ++i) gt.instance_labels[i] = (int)inst[i] - 1;
    gt.boundary_mask.resize(boundary.size());
    for (std::size_t i = 0; i < boundary.size(); ++i)
        gt.boundary_mask[i] = boundary[i] ? 1 : 0;
    return gt;
}

PredictionMaps load_prediction_maps(const fs::path& dir) {
    PredictionMaps maps;
    int w, h, ch;
    maps.semantic = read_raster(dir / "semantic", w, h, ch);
    maps.width = w;
    maps.height = h;
    maps.num_classes = ch - 1;
    int w2, h2, ch2;
    maps.boundary = read_raster(dir / "boundary_prob", w2, h2, ch2);
    if (w2 != w || h2 != h || ch2 != 1)
        throw DataError("prediction maps have inconsistent dimensions");
    return maps;
}

// --- Hypotheses ----------------------------------------------------------------

void save_hypotheses(const fs::path& path, const HypothesisSet& set) {
    json j = json::array();
    for (const ClassHypotheses& cls : set.classes) {
        json cj;
        cj["class_id"] = cls.class_id;
        json hj = json::array();
        for (const PoseHypothesis& h : cls.hypotheses) {
            json e = transform_to_json(h.pose);
            e["lcp"] = h.lcp;
            e["source_base"] = h.source_base;
            if (h.has_features)
                e["features"] = {h.features[0], h.features[1], h.features[2], h.features[3],
                                 h.features[4]};
            if (h.has_score) {
                e["predicted_adi"] = h.predicted_adi;
                e["score"] = h.score;
            }
            hj.push_back(e);
        }
        cj["hypotheses"] = hj;
        j.push_back(cj);
    }
    write_text_atomic(path, j.dump(2) + "\n");
}

HypothesisSet load_hypotheses(const fs::path& path) {
    const json j = json::parse(read_text(path));
    HypothesisSet set;
    for (const auto& cj : j) {
        ClassHypotheses cls;
        cls.class_id = cj.at("class_id").get<int>();
        for (const auto& e : cj.at("hypotheses")) {
            PoseHypothesis h;
            h.pose = transform_from_json(e);
            h.lcp = e.at("lcp").get<double>();
            h.source_base = e.at("source_base").get<int>();
            if (e.contains("features")) {
                for (int i = 0; i < 5; ++i) h.features[i] = e["features"][i].get<double>();
                h.has_features = true;
            }
            if (e.contains("score")) {
                h.predicted_adi = e.at("predicted_adi").get<double>();
                h.score = e.at("score").get<double>();
                h.has_score = true;
            }
            cls.hypotheses.push_back(h);
        }
        set.classes.push_back(std::move(cls));
    }
    return set;
}

// --- Ensembles -------------------------------------------------------------------

void save_ensemble(const fs::path& path, const TreeEnsemble& ensemble) {
    json j;
    j["initial"] = dtos(ensemble.initial);
    j["learning_rate"] = dtos(ensemble.learning_rate);
    json trees = json::array();
    for (const RegressionTree& tree : ensemble.trees) {
        json nodes = json::array();
        for (const TreeNode& n : tree.nodes)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", dtos(n.threshold)},
                             {"left", n.left},
                             {"right", n.right},
                             {"value", dtos(n.value)}});
        trees.push_back({{"nodes", nodes}});
    }
    j["trees"] = trees;
    write_text_atomic(path, j.dump(2) + "\n");
}

TreeEnsemble load_ensemble(const fs::path& path) {
    const json j = json::parse(read_text(path));
    TreeEnsemble ensemble;
    ensemble.initial = stod_exact(j.at("initial").get<std::string>());
    ensemble.learning_rate = stod_exact(j.at("learning_rate").get<std::string>());
    for (const auto& tj : j.at("trees")) {
        RegressionTree tree;
        for (const auto& nj : tj.at("nodes")) {
            TreeNode n;
            n.feature = nj.at("feature").get<int>();
            n.threshold = stod_exact(nj.at("threshold").get<std::string>());
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
            n.value = stod_exact(nj.at("value").get<std::string>());
            tree.nodes.push_back(n);
        }
        ensemble.trees.push_back(std::move(tree));
    }
    return ensemble;
}

void save_training_log(const fs::path& path, const std::vector<TrainingLogRow>& rows) {
    std::ostringstream out;
    out << "round,train_mse,holdout_mse\n";
    for (const TrainingLogRow& r : rows) {
        out << r.round << ',' << dtos(r.train_mse) << ',';
        if (r.holdout_mse >= 0) out << dtos(r.holdout_mse);
        out << "\n";
    }
    write_text_atomic(path, out.str());
}

// --- Selection reports -------------------------------------------------------------

void save_selection_report(const fs::path& path, const SelectionReport& report) {
    json j;
    j["solver"] = report.solver;
    j["objective"] = report.objective;
    j["nodes"] = report.nodes;
    j["wall_time_ms"] = report.wall_time_ms;
    json poses = json::array();
    for (std::size_t i = 0; i < report.poses.size(); ++i) {
        json pj = transform_to_json(report.poses[i].pose);
        pj["class_id"] = report.poses[i].class_id;
        pj["score"] = i < report.scores.size() ? report.scores[i] : 0.0;
        poses.push_back(pj);
    }
    j["poses"] = poses;
    write_text_atomic(path, j.dump(2) + "\n");
}

SelectionReport load_selection_report(const fs::path& path) {
    const json j = json::parse(read_text(path));
    SelectionReport report;
    report.solver = j.at("solver").get<std::string>();
    report.objective = j.at("objective").get<double>();
    report.nodes = j.at("nodes").get<std::int64_t>();
    report.wall_time_ms = j.at("wall_time_ms").get<double>();
    for (const auto& pj : j.at("poses")) {
        report.poses.push_back({pj.at("class_id").get<int>(), transform_from_json(pj)});
        report.scores.push_back(pj.at("score").get<double>());
    }
    return report;
}

// --- Configuration --------------------------------------------------------------

double PipelineConfig::resolve_epsilon_v(std::span<const MeshModel> models) const {
    if (epsilon_v >= 0) return epsilon_v;
    double vmin = std::numeric_limits<double>::infinity();
    for (const MeshModel& m : models) vmin = std::min(vmin, std::abs(m.signed_volume()));
    return std::isfinite(vmin) ? 0.03 * vmin : 0.0;
}

PipelineConfig default_config() { return {}; }

PipelineConfig load_config(const fs::path& path) {
    PipelineConfig cfg;
    auto in = open_in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!isspace((unsigned char)c)) blank = false;
            if (blank) continue;
            throw DataError("config parse error at line " + std::to_string(line_no));
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto num = [&] { return stod_exact(value); };
        const auto flag = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw DataError("config: boolean expected for " + key);
        };

        if (key == "delta") cfg.hypgen.delta = num();
        else if (key == "epsilon_l") cfg.hypgen.epsilon_l = (int)num();
        else if (key == "bases_per_class") cfg.hypgen.bases_per_class = (int)num();
        else if (key == "retry_budget") cfg.hypgen.retry_budget = (int)num();
        else if (key == "gamma") cfg.hypgen.gamma = num();
        else if (key == "max_hypotheses") cfg.hypgen.max_hypotheses = (int)num();
        else if (key == "tau_plane_frac") cfg.hypgen.tau_plane_frac = num();
        else if (key == "cong_dist_frac") cfg.hypgen.cong_dist_frac = num();
        else if (key == "ratio_tol") cfg.hypgen.ratio_tol = num();
        else if (key == "lcp_radius_frac") cfg.hypgen.lcp_radius_frac = num();
        else if (key == "lcp_samples") cfg.hypgen.lcp_samples = (int)num();
        else if (key == "min_lcp") cfg.hypgen.min_lcp = num();
        else if (key == "max_candidates_per_base")
            cfg.hypgen.max_candidates_per_base = (int)num();
        else if (key == "dedup_rot_deg") cfg.hypgen.dedup_rot_deg = num();
        else if (key == "dedup_trans_frac") cfg.hypgen.dedup_trans_frac = num();
        else if (key == "icp_iterations") cfg.hypgen.icp_iterations = (int)num();
        else if (key == "icp_radius_frac") cfg.hypgen.icp_radius_frac = num();
        else if (key == "model_samples") cfg.hypgen.model_samples = (int)num();
        else if (key == "use_boundary") cfg.hypgen.use_boundary = flag();
        else if (key == "delta_s") cfg.features.delta_s = num();
        else if (key == "delta_b") cfg.features.delta_b = num();
        else if (key == "sb_threshold") cfg.features.sb_threshold = num();
        else if (key == "n_trees") cfg.gbrt.n_trees = (int)num();
        else if (key == "max_depth") cfg.gbrt.max_depth = (int)num();
        else if (key == "learning_rate") cfg.gbrt.learning_rate = num();
        else if (key == "min_leaf") cfg.gbrt.min_leaf = (int)num();
        else if (key == "eta_sem") cfg.noise.eta_sem = num();
        else if (key == "sigma_sem") cfg.noise.sigma_sem = num();
        else if (key == "dilate_radius") cfg.noise.dilate_radius = (int)num();
        else if (key == "speckle_rate") cfg.noise.speckle_rate = num();
        else if (key == "dropout_rate") cfg.noise.dropout_rate = num();
        else if (key == "k_l") cfg.k_l = num();
        else if (key == "epsilon_v") cfg.epsilon_v = num();
        else if (key == "voxel_frac") cfg.voxel_frac = num();
        else throw DataError("config: unknown key '" + key + "'");
    }
    return cfg;
}

void save_config(const fs::path& path, const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "# hypothesis generation\n";
    out << "delta = " << dtos(cfg.hypgen.delta) << "\n";
    out << "epsilon_l = " << cfg.hypgen.epsilon_l << "\n";
    out << "bases_per_class = " << cfg.hypgen.bases_per_class << "\n";
    out << "retry_budget = " << cfg.hypgen.retry_budget << "\n";
    out << "gamma = " << dtos(cfg.hypgen.gamma) << "\n";
    out << "max_hypotheses = " << cfg.hypgen.max_hypotheses << "\n";
    out << "tau_plane_frac = " << dtos(cfg.hypgen.tau_plane_frac) << "\n";
    out << "cong_dist_frac = " << dtos(cfg.hypgen.cong_dist_frac) << "\n";
    out << "ratio_tol = " << dtos(cfg.hypgen.ratio_tol) << "\n";
    out << "lcp_radius_frac = " << dtos(cfg.hypgen.lcp_radius_frac) << "\n";
    out << "lcp_samples = " << cfg.hypgen.lcp_samples << "\n";
    out << "min_lcp = " << dtos(cfg.hypgen.min_lcp) << "\n";
    out << "max_candidates_per_base = " << cfg.hypgen.max_candidates_per_base << "\n";
    out << "dedup_rot_deg = " << dtos(cfg.hypgen.dedup_rot_deg) << "\n";
    out << "dedup_trans_frac = " << dtos(cfg.hypgen.dedup_trans_frac) << "\n";
    out << "icp_iterations = " << cfg.hypgen.icp_iterations << "\n";
    out << "icp_radius_frac = " << dtos(cfg.hypgen.icp_radius_frac) << "\n";
    out << "model_samples = " << cfg.hypgen.model_samples << "\n";
    out << "use_boundary = " << (cfg.hypgen.use_boundary ? "true" : "false") << "\n";
    out << "# alignment features\n";
    out << "delta_s = " << dtos(cfg.features.delta_s) << "\n";
    out << "delta_b = " << dtos(cfg.features.delta_b) << "\n";
    out << "sb_threshold = " << dtos(cfg.features.sb_threshold) << "\n";
    out << "# regressor\n";
    out << "n_trees = " << cfg.gbrt.n_trees << "\n";
    out << "max_depth = " << cfg.gbrt.max_depth << "\n";
    out << "learning_rate = " << dtos(cfg.gbrt.learning_rate) << "\n";
    out << "min_leaf = " << cfg.gbrt.min_leaf << "\n";
    out << "# prediction noise\n";
    out << "eta_sem = " << dtos(cfg.noise.eta_sem) << "\n";
    out << "sigma_sem = " << dtos(cfg.noise.sigma_sem) << "\n";
    out << "dilate_radius = " << cfg.noise.dilate_radius << "\n";
    out << "speckle_rate = " << dtos(cfg.noise.speckle_rate) << "\n";
    out << "dropout_rate = " << dtos(cfg.noise.dropout_rate) << "\n";
    out << "# selection and evaluation\n";
    out << "k_l = " << dtos(cfg.k_l) << "\n";
    out << "epsilon_v = " << dtos(cfg.epsilon_v) << "\n";
    out << "voxel_frac = " << dtos(cfg.voxel_frac) << "\n";
    write_text_atomic(path, out.str());
}

}  // namespace mipose::io
