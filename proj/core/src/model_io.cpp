#include "froda/model_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "froda/data_io.hpp"

namespace froda {

namespace {

constexpr std::array<char, 8> kMagic{'F', 'R', 'O', 'D', 'A', 'M', 'D', 'L'};

using nlohmann::json;

template <typename T>
void put(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw BadModelFile("bad model file: truncated header");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

json hyperparams_json(const HyperParams& hp) {
  return {{"alpha", hp.alpha},
          {"beta", hp.beta},
          {"lambda1", hp.lambda1},
          {"lambda2", hp.lambda2},
          {"epsilon", hp.epsilon},
          {"d", hp.d},
          {"outer_max_iter", hp.outer_max_iter},
          {"outer_tol", hp.outer_tol},
          {"pca_variance", hp.pca_variance},
          {"inner",
           {{"tol", hp.inner.tol},
            {"max_iter", hp.inner.max_iter},
            {"ridge", hp.inner.ridge},
            {"dual_tol", hp.inner.dual_tol}}}};
}

HyperParams hyperparams_from(const json& j) {
  HyperParams hp;
  hp.alpha = j.at("alpha").get<double>();
  hp.beta = j.at("beta").get<double>();
  hp.lambda1 = j.at("lambda1").get<double>();
  hp.lambda2 = j.at("lambda2").get<double>();
  hp.epsilon = j.at("epsilon").get<double>();
  hp.d = j.at("d").get<Eigen::Index>();
  hp.outer_max_iter = j.at("outer_max_iter").get<int>();
  hp.outer_tol = j.at("outer_tol").get<double>();
  hp.pca_variance = j.at("pca_variance").get<double>();
  const auto& inner = j.at("inner");
  hp.inner.tol = inner.at("tol").get<double>();
  hp.inner.max_iter = inner.at("max_iter").get<int>();
  hp.inner.ridge = inner.at("ridge").get<double>();
  hp.inner.dual_tol = inner.at("dual_tol").get<double>();
  return hp;
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw BadModelFile(std::string("bad model file: matrix ") + name + " has shape " + std::to_string(m.rows()) +
                       "x" + std::to_string(m.cols()));
  }
}

}  // namespace

void write_model(const FactorizedModel& model, std::ostream& out) {
  std::vector<std::pair<std::string, const Matrix*>> matrices{{"V", &model.V}, {"U", &model.U}};
  if (model.U_src) matrices.emplace_back("U_src", &*model.U_src);
  matrices.emplace_back("S", &model.S);
  matrices.emplace_back("T", &model.T);
  if (model.W) matrices.emplace_back("W", &*model.W);
  matrices.emplace_back("source_data", &model.source_data);
  matrices.emplace_back("target_data", &model.target_data);
  Matrix mean;
  if (model.preprocessing) {
    matrices.emplace_back("projection_basis", &model.preprocessing->basis);
    mean = model.preprocessing->mean;
    matrices.emplace_back("projection_mean", &mean);
  }

  json header;
  header["variant"] = std::string(to_string(model.variant));
  header["d"] = model.d;
  header["classes"] = model.classes;
  header["hyperparams"] = hyperparams_json(model.hp);
  header["n_outer_iters"] = model.n_outer_iters;
  header["objective_trace"] = model.objective_trace;
  header["source_labels"] = model.source_labels;
  json names = json::array();
  for (const auto& [name, m] : matrices) names.push_back(name);
  header["matrices"] = names;

  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : matrices) write_binary_matrix(*m, out);
}

FactorizedModel read_model(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw BadModelFile("bad model file: wrong magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw BadModelFile("bad model file: unsupported format version " + std::to_string(version));
  }
  const auto length = get<std::uint64_t>(in);
  if (length > (std::uint64_t{1} << 32)) throw BadModelFile("bad model file: implausible header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw BadModelFile("bad model file: truncated header");

  FactorizedModel model;
  try {
    const json header = json::parse(text);
    model.variant = parse_variant(header.at("variant").get<std::string>());
    model.d = header.at("d").get<Eigen::Index>();
    model.classes = header.at("classes").get<int>();
    model.hp = hyperparams_from(header.at("hyperparams"));
    model.n_outer_iters = header.at("n_outer_iters").get<int>();
    model.objective_trace = header.at("objective_trace").get<std::vector<double>>();
    model.source_labels = header.at("source_labels").get<std::vector<int>>();
    std::map<std::string, Matrix> matrices;
    for (const auto& name : header.at("matrices")) {
      matrices[name.get<std::string>()] = read_binary_matrix(in);
    }
    auto take = [&](const char* name) {
      auto it = matrices.find(name);
      if (it == matrices.end()) throw BadModelFile(std::string("bad model file: missing matrix ") + name);
      return std::move(it->second);
    };
    model.V = take("V");
    model.U = take("U");
    model.S = take("S");
    model.T = take("T");
    model.source_data = take("source_data");
    model.target_data = take("target_data");
    if (matrices.count("U_src")) model.U_src = take("U_src");
    if (matrices.count("W")) model.W = take("W");
    if (matrices.count("projection_basis")) {
      JointProjection p;
      p.basis = take("projection_basis");
      const Matrix mean = take("projection_mean");
      expect_shape(mean, p.basis.rows(), 1, "projection_mean");
      p.mean = mean.col(0);
      model.preprocessing = std::move(p);
    }
  } catch (const BadModelFile&) {
    throw;
  } catch (const std::exception& e) {
    throw BadModelFile(std::string("bad model file: ") + e.what());
  }

  const Eigen::Index D = model.V.rows();
  const Eigen::Index d = model.d;
  const bool grouped_source = model.variant == Variant::DFrodaU;
  if (d < 1) throw BadModelFile("bad model file: d must be >= 1");
  expect_shape(model.V, D, d, "V");
  expect_shape(model.U, D, d, "U");
  expect_shape(model.T, 2 * d, model.target_data.cols(), "T");
  expect_shape(model.target_data, D, model.T.cols(), "target_data");
  expect_shape(model.S, grouped_source ? 2 * d : d, model.source_data.cols(), "S");
  expect_shape(model.source_data, D, model.S.cols(), "source_data");
  if (model.U_src) expect_shape(*model.U_src, D, d, "U_src");
  if (grouped_source && !model.U_src) throw BadModelFile("bad model file: missing matrix U_src");
  if (model.variant != Variant::Froda && !model.W) throw BadModelFile("bad model file: missing matrix W");
  if (model.W) {
    expect_shape(*model.W, grouped_source ? model.classes + 1 : model.classes, grouped_source ? 2 * d : d, "W");
  }
  if (model.preprocessing && model.preprocessing->basis.cols() != D) {
    throw BadModelFile("bad model file: projection does not match the model dimension");
  }
  if (!model.source_labels.empty() && static_cast<Eigen::Index>(model.source_labels.size()) != model.S.cols()) {
    throw BadModelFile("bad model file: source label count differs from source sample count");
  }
  return model;
}

void save_model(const FactorizedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_model(model, out);
  if (!out) throw Error("write failed: " + path.string());
}

FactorizedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_model(in);
  } catch (const BadModelFile&) {
    throw;
  } catch (const Error& e) {
    throw BadModelFile(std::string("bad model file: ") + e.what());
  }
}

}  // namespace froda
