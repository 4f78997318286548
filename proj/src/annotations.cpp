#include "dirhoi/annotations.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dirhoi/errors.hpp"

namespace dirhoi {
namespace {

using nlohmann::json;

constexpr const char* kFormatName = "dirhoi-annotations";

std::string encode_doubles(const std::vector<double>& values) {
  std::vector<unsigned char> raw(values.size() * sizeof(double));
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* p = raw.data() + i * sizeof(double);
    std::memcpy(p, &values[i], sizeof(double));
    if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(double));
  }
  std::string out(4 * ((raw.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), raw.data(),
                                static_cast<int>(raw.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<double> decode_doubles(const std::string& text, std::size_t line) {
  if (text.size() % 4 != 0) throw ParseError(line, "feature payload is not valid base64");
  std::vector<unsigned char> raw(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(raw.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError(line, "feature payload is not valid base64");
  std::size_t size = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
  for (auto it = text.rbegin(); it != text.rend() && *it == '='; ++it) --size;
  if (size % sizeof(double) != 0) throw ParseError(line, "feature payload has a partial value");
  std::vector<double> values(size / sizeof(double));
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* p = raw.data() + i * sizeof(double);
    if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(double));
    std::memcpy(&values[i], p, sizeof(double));
  }
  return values;
}

json box_json(const BBox& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

BBox box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box needs 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json points_json(const KeypointSet& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(json::array({p.x, p.y}));
  return out;
}

KeypointSet points_from(const json& j) {
  KeypointSet points;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw std::invalid_argument("keypoint needs 2 numbers");
    points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return points;
}

json config_json(const GeneratorConfig& c) {
  return {{"grid_rows", c.grid_rows},           {"grid_cols", c.grid_cols},
          {"raw_features", c.raw_features},     {"keypoints", c.keypoints},
          {"object_classes", c.object_classes}, {"verb_classes", c.verb_classes},
          {"train_scenes", c.train_scenes},     {"test_scenes", c.test_scenes},
          {"feature_noise", c.feature_noise},   {"pose_label_noise", c.pose_label_noise},
          {"rare_class_weight", c.rare_class_weight}};
}

GeneratorConfig config_from(const json& j) {
  GeneratorConfig c;
  j.at("grid_rows").get_to(c.grid_rows);
  j.at("grid_cols").get_to(c.grid_cols);
  j.at("raw_features").get_to(c.raw_features);
  j.at("keypoints").get_to(c.keypoints);
  j.at("object_classes").get_to(c.object_classes);
  j.at("verb_classes").get_to(c.verb_classes);
  j.at("train_scenes").get_to(c.train_scenes);
  j.at("test_scenes").get_to(c.test_scenes);
  j.at("feature_noise").get_to(c.feature_noise);
  j.at("pose_label_noise").get_to(c.pose_label_noise);
  j.at("rare_class_weight").get_to(c.rare_class_weight);
  return c;
}

json scene_json(const Scene& scene, const char* split) {
  json persons = json::array();
  for (const auto& p : scene.persons)
    persons.push_back({{"box", box_json(p.box)},
                       {"keypoints", points_json(p.keypoints)},
                       {"pose_label", points_json(p.pose_label)}});
  json objects = json::array();
  for (const auto& o : scene.objects)
    objects.push_back({{"box", box_json(o.box)}, {"class", o.object_class}});
  json pairs = json::array();
  for (const auto& p : scene.pairs)
    pairs.push_back({{"person", p.person}, {"object", p.object}, {"verbs", p.verbs}});
  return {{"split", split},
          {"id", scene.id},
          {"features", encode_doubles(scene.features)},
          {"persons", std::move(persons)},
          {"objects", std::move(objects)},
          {"pairs", std::move(pairs)}};
}

Scene scene_from(const json& j, const GeneratorConfig& config, std::size_t line) {
  Scene scene;
  j.at("id").get_to(scene.id);
  scene.features = decode_doubles(j.at("features").get<std::string>(), line);
  if (scene.features.size() != config.grid_rows * config.grid_cols * config.raw_features)
    throw ParseError(line, "feature grid has the wrong size");
  for (const auto& p : j.at("persons")) {
    Person person{box_from(p.at("box")), points_from(p.at("keypoints")),
                  points_from(p.at("pose_label"))};
    if (person.keypoints.size() != config.keypoints ||
        person.pose_label.size() != config.keypoints)
      throw ParseError(line, "wrong keypoint count");
    scene.persons.push_back(std::move(person));
  }
  for (const auto& o : j.at("objects")) {
    SceneObject object{box_from(o.at("box")), o.at("class").get<int>()};
    if (object.object_class < 0 ||
        static_cast<std::size_t>(object.object_class) >= config.object_classes)
      throw ParseError(line, "object class out of range");
    scene.objects.push_back(object);
  }
  for (const auto& p : j.at("pairs")) {
    Interaction pair{p.at("person").get<std::size_t>(), p.at("object").get<std::size_t>(),
                     p.at("verbs").get<std::vector<int>>()};
    if (pair.person >= scene.persons.size() || pair.object >= scene.objects.size())
      throw ParseError(line, "pair references a missing person or object");
    if (pair.verbs.empty()) throw ParseError(line, "pair without verbs");
    for (int v : pair.verbs)
      if (v < 0 || static_cast<std::size_t>(v) >= config.verb_classes)
        throw ParseError(line, "verb id out of range");
    scene.pairs.push_back(std::move(pair));
  }
  return scene;
}

}  // namespace

void write_annotations(const DatasetSplit& split, std::ostream& out) {
  json header = {{"format", kFormatName},
                 {"version", kAnnotationVersion},
                 {"seed", split.seed},
                 {"config", config_json(split.config)}};
  out << header.dump() << '\n';
  for (const auto& s : split.train) out << scene_json(s, "train").dump() << '\n';
  for (const auto& s : split.test) out << scene_json(s, "test").dump() << '\n';
}

DatasetSplit read_annotations(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  DatasetSplit split;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed record: ") + e.what());
    }
    try {
      if (!have_header) {
        if (record.value("format", std::string()) != kFormatName)
          throw ParseError(line, "not an annotation file");
        const int version = record.at("version").get<int>();
        if (version != kAnnotationVersion)
          throw VersionError("annotation schema version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kAnnotationVersion) + ")");
        record.at("seed").get_to(split.seed);
        split.config = config_from(record.at("config"));
        have_header = true;
        continue;
      }
      const auto which = record.at("split").get<std::string>();
      Scene scene = scene_from(record, split.config, line);
      if (which == "train") {
        split.train.push_back(std::move(scene));
      } else if (which == "test") {
        split.test.push_back(std::move(scene));
      } else {
        throw ParseError(line, "unknown split '" + which + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line, std::string("bad field: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line, e.what());
    }
  }
  if (!have_header) throw ParseError(line + 1, "missing header record");
  split.refresh_statistics();
  return split;
}

void save_annotations(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_annotations(split, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

DatasetSplit load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_annotations(in);
}

}  // namespace dirhoi
