#include "omni/homography.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "omni/error.hpp"
#include "omni/manifest_io.hpp"

namespace omni {

Homography Homography::from_params(const Params& p) {
  return from_matrix({p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0});
}

Homography Homography::from_matrix(const Matrix& m) {
  if (m[8] == 0.0 || !std::isfinite(m[8])) {
    throw ValidationError("homography: bottom-right entry must be finite and non-zero");
  }
  Homography h;
  for (int i = 0; i < 9; ++i) h.m_[i] = m[i] / m[8];
  h.m_[8] = 1.0;
  return h;
}

Homography Homography::translation_pixels(double tx, double ty, int width, int height) {
  return from_params({1, 0, 2.0 * tx / width, 0, 1, 2.0 * ty / height, 0, 0});
}

Homography::Params Homography::params() const {
  return {m_[0], m_[1], m_[2], m_[3], m_[4], m_[5], m_[6], m_[7]};
}

double Homography::determinant() const {
  const auto& m = m_;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Homography::invertible() const { return std::abs(determinant()) > 1e-12; }

Homography Homography::inverse() const {
  const double det = determinant();
  if (!(std::abs(det) > 1e-12)) throw ValidationError("homography is singular");
  const auto& m = m_;
  Matrix adj{m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
             m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
             m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  // The adjugate is the inverse up to scale; from_matrix renormalises, but a
  // zero bottom-right entry needs the explicit division path.
  if (adj[8] == 0.0) throw ValidationError("homography inverse has no finite normal form");
  return from_matrix(adj);
}

std::optional<std::array<double, 2>> Homography::map(double u, double v) const {
  const auto& m = m_;
  const double w = m[6] * u + m[7] * v + m[8];
  if (!(w > 0.0)) return std::nullopt;
  return std::array<double, 2>{(m[0] * u + m[1] * v + m[2]) / w, (m[3] * u + m[4] * v + m[5]) / w};
}

Homography Homography::operator*(const Homography& other) const {
  Matrix r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m_[i * 3 + k] * other.m_[k * 3 + j];
      r[i * 3 + j] = s;
    }
  }
  return from_matrix(r);
}

bool within_corner_bound(const Homography& h, double bound) {
  for (double u : {-1.0, 1.0}) {
    for (double v : {-1.0, 1.0}) {
      const auto p = h.map(u, v);
      if (!p || !(std::abs((*p)[0]) <= bound) || !(std::abs((*p)[1]) <= bound)) return false;
    }
  }
  return true;
}

Frame apply_homography(const Frame& frame, const Homography& h, const Fill& fill) {
  const Homography inv = h.inverse();
  const int w = frame.width();
  const int ht = frame.height();
  Frame out(w, ht, frame.channels());
  for (int y = 0; y < ht; ++y) {
    const double v = (2.0 * y + 1.0) / ht - 1.0;
    for (int x = 0; x < w; ++x) {
      const double u = (2.0 * x + 1.0) / w - 1.0;
      const auto src = inv.map(u, v);
      // Points behind the camera have no source pixel; sample far outside.
      const double sx = src ? ((*src)[0] + 1.0) * w / 2.0 - 0.5 : -1e9;
      const double sy = src ? ((*src)[1] + 1.0) * ht / 2.0 - 0.5 : -1e9;
      for (int c = 0; c < frame.channels(); ++c) out.at(x, y, c) = bilinear(frame, sx, sy, c, fill);
    }
  }
  return out;
}

void WarpModel::validate() const {
  for (double v : mu) {
    if (!std::isfinite(v)) throw ValidationError("warp model: non-finite mu");
  }
  Eigen::Matrix<double, 8, 8> s;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      s(i, j) = sigma[i * 8 + j];
      if (!std::isfinite(s(i, j))) throw ValidationError("warp model: non-finite sigma");
    }
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      if (std::abs(s(i, j) - s(j, i)) > 1e-12 * (1.0 + std::abs(s(i, j)))) {
        throw ValidationError("warp model: sigma is not symmetric");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> eig(s, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw ValidationError("warp model: sigma is not positive semi-definite");
  }
}

nlohmann::json WarpModel::to_json() const {
  nlohmann::json j{{"mu", mu}, {"sigma", sigma}};
  if (class_index) {
    j["scope"] = "class-specific";
    j["class_index"] = *class_index;
  } else {
    j["scope"] = "class-agnostic";
  }
  return j;
}

WarpModel WarpModel::from_json(const nlohmann::json& j) {
  WarpModel m;
  try {
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto sigma = j.at("sigma").get<std::vector<double>>();
    if (mu.size() != 8 || sigma.size() != 64) {
      throw ValidationError("warp model: mu needs 8 values and sigma 64");
    }
    std::copy(mu.begin(), mu.end(), m.mu.begin());
    std::copy(sigma.begin(), sigma.end(), m.sigma.begin());
    const auto scope = j.at("scope").get<std::string>();
    if (scope == "class-specific") {
      m.class_index = j.at("class_index").get<int>();
    } else if (scope != "class-agnostic") {
      throw ValidationError("warp model: unknown scope '" + scope + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("warp model: ") + e.what());
  }
  m.validate();
  return m;
}

WarpModel fit_warp_model(std::span<const HomographySequence> sequences,
                         std::optional<int> class_scope) {
  std::vector<Homography::Params> rows;
  for (const auto& seq : sequences) {
    if (class_scope && seq.class_index != class_scope) continue;
    for (const auto& h : seq.steps) rows.push_back(h.params());
  }
  if (rows.size() < 2) throw ValidationError("fit_warp_model: need at least 2 homographies");

  const std::size_t n = rows.size();
  Eigen::Matrix<double, Eigen::Dynamic, 8> x(static_cast<Eigen::Index>(n), 8);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 8; ++d) x(static_cast<Eigen::Index>(i), d) = rows[i][d];
  }
  // Shift by the first row before averaging so identical inputs give a mean
  // equal to that row and a covariance of exactly zero.
  const Eigen::Matrix<double, 1, 8> pivot = x.row(0);
  const Eigen::Matrix<double, 1, 8> offset = (x.rowwise() - pivot).colwise().mean();
  const Eigen::Matrix<double, 1, 8> mean = pivot + offset;
  const auto centered = (x.rowwise() - mean).eval();
  const Eigen::Matrix<double, 8, 8> cov = (centered.transpose() * centered) / static_cast<double>(n);

  WarpModel m;
  m.class_index = class_scope;
  for (int d = 0; d < 8; ++d) m.mu[d] = mean(d);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) m.sigma[i * 8 + j] = 0.5 * (cov(i, j) + cov(j, i));
  }
  return m;
}

Homography sample_homography(const WarpModel& model, RngStream& rng) {
  Eigen::Matrix<double, 8, 8> s;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) s(i, j) = model.sigma[i * 8 + j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> eig(s);
  const Eigen::Matrix<double, 8, 1> scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix<double, 8, 8> factor = eig.eigenvectors() * scale.asDiagonal();

  for (int attempt = 0; attempt < kMaxWarpDraws; ++attempt) {
    Eigen::Matrix<double, 8, 1> z;
    for (int d = 0; d < 8; ++d) z(d) = rng.normal();
    const Eigen::Matrix<double, 8, 1> delta = factor * z;
    Homography::Params p;
    for (int d = 0; d < 8; ++d) p[d] = model.mu[d] + delta(d);
    const Homography h = Homography::from_params(p);
    if (h.invertible() && within_corner_bound(h)) return h;
  }
  throw RuntimeError("warp model is degenerate: " + std::to_string(kMaxWarpDraws) +
                     " consecutive draws were singular or out of bounds");
}

void save_warp_models(std::span<const WarpModel> models, const std::filesystem::path& path) {
  if (models.size() == 1) {
    write_json_file(models.front().to_json(), path);
    return;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) arr.push_back(m.to_json());
  write_json_file(arr, path);
}

std::vector<WarpModel> load_warp_models(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  std::vector<WarpModel> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(WarpModel::from_json(e));
  } else {
    out.push_back(WarpModel::from_json(j));
  }
  if (out.empty()) throw ValidationError(path.string() + ": no warp models");
  return out;
}

nlohmann::json sequences_to_json(std::span<const HomographySequence> sequences) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sequences) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& h : s.steps) steps.push_back(h.params());
    nlohmann::json e{{"homographies", std::move(steps)}};
    e["class_index"] = s.class_index ? nlohmann::json(*s.class_index) : nlohmann::json(nullptr);
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<HomographySequence> sequences_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("homography sequences: expected a JSON array");
  std::vector<HomographySequence> out;
  try {
    for (const auto& e : j) {
      HomographySequence s;
      if (e.contains("class_index") && !e["class_index"].is_null()) {
        s.class_index = e["class_index"].get<int>();
      }
      for (const auto& p : e.at("homographies")) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 8) throw ValidationError("homography sequences: each entry needs 8 params");
        Homography::Params params;
        std::copy(v.begin(), v.end(), params.begin());
        s.steps.push_back(Homography::from_params(params));
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("homography sequences: ") + e.what());
  }
  return out;
}

}  // namespace omni
