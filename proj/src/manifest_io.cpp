#include "omni/manifest_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "omni/binary_io.hpp"
#include "omni/error.hpp"

namespace omni {
namespace {

using nlohmann::json;

class ParseError {
 public:
  ParseError(const std::filesystem::path& path, std::size_t line) : path_(path), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError(path_.string() + ":" + std::to_string(line_) + ": " + msg);
  }

  const json& require(const json& obj, const char* field) const {
    auto it = obj.find(field);
    if (it == obj.end()) fail(std::string("missing field '") + field + "'");
    return *it;
  }

  template <typename T>
  T get(const json& value, const char* field) const {
    try {
      return value.get<T>();
    } catch (const json::exception&) {
      fail(std::string("field '") + field + "' has the wrong type");
    }
  }

 private:
  const std::filesystem::path& path_;
  std::size_t line_;
};

json frame_to_json(const Frame& f) {
  std::vector<float> le(f.pixels().size());
  for (std::size_t i = 0; i < le.size(); ++i) le[i] = binio::to_little(f.pixels()[i]);
  return json{{"width", f.width()},
              {"height", f.height()},
              {"channels", f.channels()},
              {"pixels", binio::base64_encode(le.data(), le.size() * sizeof(float))}};
}

Frame frame_from_json(const json& j, const ParseError& err) {
  const int w = err.get<int>(err.require(j, "width"), "width");
  const int h = err.get<int>(err.require(j, "height"), "height");
  const int c = err.get<int>(err.require(j, "channels"), "channels");
  const auto payload = err.get<std::string>(err.require(j, "pixels"), "pixels");
  std::vector<unsigned char> bytes;
  try {
    bytes = binio::base64_decode(payload);
  } catch (const ValidationError& e) {
    err.fail(std::string("field 'pixels': ") + e.what());
  }
  if (bytes.size() % sizeof(float) != 0) err.fail("field 'pixels' is not a float32 array");
  std::vector<float> px(bytes.size() / sizeof(float));
  std::memcpy(px.data(), bytes.data(), bytes.size());
  for (float& p : px) p = binio::to_little(p);
  try {
    return Frame(w, h, c, std::move(px));
  } catch (const ValidationError& e) {
    err.fail(std::string("field 'frames': ") + e.what());
  }
}

}  // namespace

json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["source_kind"] = std::string(to_string(s.source_kind));
  j["fps"] = s.fps;
  if (s.label) j["label"] = *s.label;
  if (s.pseudo_label) j["pseudo_label"] = *s.pseudo_label;
  if (s.confidence) j["confidence"] = *s.confidence;
  if (s.feature) j["feature"] = s.feature->values;
  json frames = json::array();
  for (const auto& f : s.frames) frames.push_back(frame_to_json(f));
  j["frames"] = std::move(frames);
  return j;
}

void save_feature_file(const std::vector<FeatureVector>& features, std::size_t dims,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  binio::write_magic(out, "OMNF");
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.size()));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims));
  binio::write_le<std::uint32_t>(out, 0);
  for (const auto& fv : features) {
    if (fv.dims() != dims) throw ValidationError("feature file rows must share one dimensionality");
    for (double v : fv.values) binio::write_le<float>(out, static_cast<float>(v));
  }
  if (!out) throw RuntimeError("failed writing " + path.string());
}

std::vector<FeatureVector> load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open feature file " + path.string());
  binio::expect_magic(in, "OMNF");
  const auto count = binio::read_le<std::uint32_t>(in, "count");
  const auto dims = binio::read_le<std::uint32_t>(in, "dims");
  (void)binio::read_le<std::uint32_t>(in, "reserved");
  std::vector<FeatureVector> rows(count);
  for (auto& row : rows) {
    row.values.resize(dims);
    for (auto& v : row.values) v = binio::read_le<float>(in, "feature values");
  }
  return rows;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path,
                   const ManifestSaveOptions& options) {
  manifest.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write manifest " + path.string());

  json header{{"version", kManifestVersion},
              {"role", std::string(to_string(manifest.role))},
              {"feature_dims", manifest.feature_dims},
              {"class_names", manifest.label_space.names()}};
  out << header.dump() << '\n';

  std::filesystem::path feature_path = path;
  feature_path += ".omnf";
  std::vector<FeatureVector> external;
  for (const auto& s : manifest.samples) {
    json j = sample_to_json(s);
    if (options.external_features && s.feature) {
      j.erase("feature");
      j["feature_ref"] = json{{"file", feature_path.filename().string()}, {"row", external.size()}};
      external.push_back(*s.feature);
    }
    out << j.dump() << '\n';
  }
  if (!external.empty()) save_feature_file(external, manifest.feature_dims, feature_path);
  if (!out) throw RuntimeError("failed writing manifest " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest " + path.string());

  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::filesystem::path loaded_feature_file;
  std::vector<FeatureVector> external;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ParseError err(path, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      err.fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) err.fail("record is not a JSON object");

    if (!have_header) {
      const int version = err.get<int>(err.require(j, "version"), "version");
      if (version != kManifestVersion) err.fail("unsupported manifest version " + std::to_string(version));
      try {
        m.role = parse_manifest_role(err.get<std::string>(err.require(j, "role"), "role"));
        m.label_space = LabelSpace(
            err.get<std::vector<std::string>>(err.require(j, "class_names"), "class_names"));
      } catch (const ValidationError& e) {
        err.fail(e.what());
      }
      m.feature_dims = err.get<std::size_t>(err.require(j, "feature_dims"), "feature_dims");
      have_header = true;
      continue;
    }

    Sample s;
    s.id = err.get<std::string>(err.require(j, "id"), "id");
    try {
      s.source_kind =
          parse_source_kind(err.get<std::string>(err.require(j, "source_kind"), "source_kind"));
    } catch (const ValidationError& e) {
      err.fail(e.what());
    }
    if (auto it = j.find("fps"); it != j.end()) s.fps = err.get<double>(*it, "fps");
    if (auto it = j.find("label"); it != j.end()) s.label = err.get<int>(*it, "label");
    if (auto it = j.find("pseudo_label"); it != j.end()) {
      s.pseudo_label = err.get<int>(*it, "pseudo_label");
    }
    if (auto it = j.find("confidence"); it != j.end()) {
      s.confidence = err.get<double>(*it, "confidence");
    }
    if (auto it = j.find("feature"); it != j.end()) {
      s.feature = FeatureVector{err.get<std::vector<double>>(*it, "feature")};
    } else if (auto ref = j.find("feature_ref"); ref != j.end()) {
      const auto file = err.get<std::string>(err.require(*ref, "file"), "feature_ref.file");
      const auto row = err.get<std::size_t>(err.require(*ref, "row"), "feature_ref.row");
      const auto feature_path = path.parent_path() / file;
      if (feature_path != loaded_feature_file) {
        external = load_feature_file(feature_path);
        loaded_feature_file = feature_path;
      }
      if (row >= external.size()) err.fail("feature_ref.row out of range");
      s.feature = external[row];
    }
    if (s.feature && s.feature->dims() != m.feature_dims) {
      err.fail("feature has " + std::to_string(s.feature->dims()) + " dims, header declares " +
               std::to_string(m.feature_dims));
    }
    if (auto it = j.find("frames"); it != j.end()) {
      if (!it->is_array()) err.fail("field 'frames' is not an array");
      for (const auto& fj : *it) s.frames.push_back(frame_from_json(fj, err));
    }
    try {
      s.validate(m.label_space);
    } catch (const ValidationError& e) {
      err.fail(e.what());
    }
    m.samples.push_back(std::move(s));
  }
  if (!have_header) throw ValidationError(path.string() + ": empty manifest (no header line)");
  m.validate();
  return m;
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace omni
