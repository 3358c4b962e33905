#include "hsidef/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hsidef/runconfig.hpp"

namespace hsidef {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'D', 'C', 'K', 'P', 'T', '1'};

struct Writer {
  Json header;
  std::string payload;

  void add_f64(const std::string& name, const double* data, std::vector<long> shape) {
    long count = 1;
    for (const long s : shape) count *= s;
    Json entry{{"name", name}, {"dtype", "f64le"}, {"shape", shape},
               {"offset", payload.size()}};
    header["tensors"].push_back(entry);
    const std::size_t bytes = static_cast<std::size_t>(count) * sizeof(double);
    const std::size_t at = payload.size();
    payload.resize(at + bytes);
    std::memcpy(payload.data() + at, data, bytes);
  }

  void add_matrix(const std::string& name, const Matrix& m) {
    // Row-major serialization keeps the format language-neutral.
    std::vector<double> rowmajor(static_cast<std::size_t>(m.size()));
    std::size_t i = 0;
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) rowmajor[i++] = m(r, c);
    add_f64(name, rowmajor.data(), {m.rows(), m.cols()});
  }

  void add_vector(const std::string& name, const Vector& v) {
    add_f64(name, v.data(), {v.size()});
  }

  void add_i32(const std::string& name, const std::vector<std::int32_t>& data,
               std::vector<long> shape) {
    Json entry{{"name", name}, {"dtype", "i32le"}, {"shape", shape},
               {"offset", payload.size()}};
    header["tensors"].push_back(entry);
    const std::size_t bytes = data.size() * sizeof(std::int32_t);
    const std::size_t at = payload.size();
    payload.resize(at + bytes);
    std::memcpy(payload.data() + at, data.data(), bytes);
  }

  void save(const std::filesystem::path& path) {
    const std::string head = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
};

struct Reader {
  Json header;
  std::string payload;

  explicit Reader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
      throw DataError("not a checkpoint file: " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("truncated checkpoint header: " + path.string());
    header = Json::parse(head);
    payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  const Json* find(const std::string& name) const {
    for (const auto& t : header.at("tensors"))
      if (t.at("name") == name) return &t;
    return nullptr;
  }

  Matrix matrix(const std::string& name) const {
    const Json* t = find(name);
    if (!t) throw DataError("checkpoint missing tensor '" + name + "'");
    const auto shape = t->at("shape").get<std::vector<long>>();
    if (shape.size() != 2) throw DataError("tensor '" + name + "' is not a matrix");
    Matrix m(shape[0], shape[1]);
    const auto offset = t->at("offset").get<std::size_t>();
    const double* src = reinterpret_cast<const double*>(payload.data() + offset);
    std::size_t i = 0;
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = src[i++];
    return m;
  }

  Vector vector(const std::string& name) const {
    const Json* t = find(name);
    if (!t) throw DataError("checkpoint missing tensor '" + name + "'");
    const auto shape = t->at("shape").get<std::vector<long>>();
    if (shape.size() != 1) throw DataError("tensor '" + name + "' is not a vector");
    Vector v(shape[0]);
    const auto offset = t->at("offset").get<std::size_t>();
    std::memcpy(v.data(), payload.data() + offset,
                static_cast<std::size_t>(shape[0]) * sizeof(double));
    return v;
  }

  std::vector<std::int32_t> ints(const std::string& name, std::vector<long>* shape_out =
                                                              nullptr) const {
    const Json* t = find(name);
    if (!t) throw DataError("checkpoint missing tensor '" + name + "'");
    const auto shape = t->at("shape").get<std::vector<long>>();
    long count = 1;
    for (const long s : shape) count *= s;
    std::vector<std::int32_t> v(static_cast<std::size_t>(count));
    const auto offset = t->at("offset").get<std::size_t>();
    std::memcpy(v.data(), payload.data() + offset, v.size() * sizeof(std::int32_t));
    if (shape_out) *shape_out = shape;
    return v;
  }
};

}  // namespace

void save_model(const ModelState& state, const std::filesystem::path& path) {
  Writer w;
  w.header["kind"] = "model";
  w.header["config"] = train_config_to_json(state.config);
  w.header["meta"] = Json{{"epoch", state.epoch},
                          {"opt_step", state.opt.step},
                          {"map_height", state.map.height},
                          {"map_width", state.map.width},
                          {"map_count", state.map.count}};
  w.header["tensors"] = Json::array();

  // Trainable tensors in the collect_params order; views are read-only here.
  auto& mutable_state = const_cast<ModelState&>(state);
  const auto params = collect_params(mutable_state);
  for (const auto& t : params) {
    std::vector<long> shape;
    for (const auto s : t.shape) shape.push_back(static_cast<long>(s));
    if (shape.size() == 2) {
      // Eigen default storage is column-major; re-emit row-major.
      Eigen::Map<const Matrix> m(t.data, shape[0], shape[1]);
      std::vector<double> rowmajor(static_cast<std::size_t>(t.size));
      std::size_t i = 0;
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) rowmajor[i++] = m(r, c);
      w.add_f64(t.name, rowmajor.data(), shape);
    } else {
      w.add_f64(t.name, t.data, shape);
    }
  }

  std::vector<std::int32_t> assignment(state.map.assignment.begin(),
                                       state.map.assignment.end());
  w.add_i32("map.assignment", assignment,
            {state.map.height, state.map.width});

  std::vector<std::int32_t> adjacency;
  for (Index i = 0; i < state.adjacency.rows(); ++i)
    for (Index j = 0; j < state.adjacency.cols(); ++j)
      adjacency.push_back(state.adjacency(i, j));
  w.add_i32("adjacency", adjacency,
            {static_cast<long>(state.adjacency.rows()),
             static_cast<long>(state.adjacency.cols())});

  w.add_matrix("node_repr_prev", state.node_repr_prev);

  for (std::size_t i = 0; i < state.opt.m.size(); ++i) {
    w.add_vector("opt.m." + params[i].name, state.opt.m[i]);
    w.add_vector("opt.v." + params[i].name, state.opt.v[i]);
  }

  w.save(path);
}

ModelState load_model(const std::filesystem::path& path) {
  Reader r(path);
  if (r.header.at("kind") != "model")
    throw DataError("checkpoint is not a model: " + path.string());

  ModelState state;
  state.config = train_config_from_json(r.header.at("config"));
  const auto& meta = r.header.at("meta");
  state.epoch = meta.at("epoch").get<int>();

  state.enc.ssl.w_e = r.matrix("ssl.w_e");
  state.enc.ssl.w_q = r.matrix("ssl.w_q");
  state.enc.ssl.w_k = r.matrix("ssl.w_k");
  state.enc.ssl.w_v = r.matrix("ssl.w_v");
  state.enc.ssl.w_t = r.matrix("ssl.w_t");
  state.enc.blanks = r.matrix("blanks");
  state.enc.gcn.w_g = r.matrix("gcn.w_g");
  state.enc.gcn.b = r.vector("gcn.b");
  state.enc.gcn.beta = state.config.beta;

  state.dec.zeta = state.config.zeta;
  state.dec.slots = static_cast<int>(state.enc.blanks.rows());
  state.dec.in_channels = state.config.n;
  for (std::size_t i = 0; i < state.config.decoder_channels.size(); ++i) {
    ConvLayer layer;
    layer.weights = r.matrix("dec.conv" + std::to_string(i) + ".w");
    layer.bias = r.vector("dec.conv" + std::to_string(i) + ".b");
    layer.klen = state.config.decoder_kernel;
    layer.act = state.config.decoder_activation;
    state.dec.conv_layers.push_back(std::move(layer));
  }
  state.dec.w_r = r.matrix("dec.w_r");
  state.dec.b_r = r.vector("dec.b_r");

  state.map.height = meta.at("map_height").get<int>();
  state.map.width = meta.at("map_width").get<int>();
  state.map.count = meta.at("map_count").get<int>();
  const auto assignment = r.ints("map.assignment");
  state.map.assignment.assign(assignment.begin(), assignment.end());
  state.map.sizes.assign(static_cast<std::size_t>(state.map.count), 0);
  for (const int a : state.map.assignment)
    state.map.sizes[static_cast<std::size_t>(a - 1)]++;

  std::vector<long> adj_shape;
  const auto adjacency = r.ints("adjacency", &adj_shape);
  state.adjacency.resize(adj_shape[0], adj_shape[1]);
  std::size_t i = 0;
  for (Index a = 0; a < adj_shape[0]; ++a)
    for (Index b = 0; b < adj_shape[1]; ++b) state.adjacency(a, b) = adjacency[i++];

  state.node_repr_prev = r.matrix("node_repr_prev");

  state.opt.step = meta.at("opt_step").get<long>();
  const auto params = collect_params(state);
  if (r.find("opt.m." + params[0].name)) {
    for (const auto& t : params) {
      state.opt.m.push_back(r.vector("opt.m." + t.name));
      state.opt.v.push_back(r.vector("opt.v." + t.name));
    }
  }
  return state;
}

void save_classifier(const MlpParams& mlp, const std::string& features,
                     const HeadConfig& config, const std::filesystem::path& path) {
  Writer w;
  w.header["kind"] = "classifier";
  w.header["config"] = head_config_to_json(config);
  w.header["meta"] = Json{{"features", features}};
  w.header["tensors"] = Json::array();
  for (std::size_t i = 0; i < mlp.w.size(); ++i) {
    w.add_matrix("w" + std::to_string(i), mlp.w[i]);
    w.add_vector("b" + std::to_string(i), mlp.b[i]);
  }
  w.save(path);
}

ClassifierCheckpoint load_classifier(const std::filesystem::path& path) {
  Reader r(path);
  if (r.header.at("kind") != "classifier")
    throw DataError("checkpoint is not a classifier: " + path.string());
  ClassifierCheckpoint out;
  out.config = head_config_from_json(r.header.at("config"));
  out.features = r.header.at("meta").at("features").get<std::string>();
  for (int i = 0; i < 4; ++i) {
    out.mlp.w.push_back(r.matrix("w" + std::to_string(i)));
    out.mlp.b.push_back(r.vector("b" + std::to_string(i)));
  }
  return out;
}

}  // namespace hsidef
