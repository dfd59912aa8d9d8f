#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "lptsim/promptbank.hpp"

namespace lptsim {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "lptsim-promptbank";
constexpr int kVersion = 1;

[[noreturn]] void bad_snapshot(const std::string& what) {
  throw Error(ErrorKind::kInvalidArgument, "bank snapshot: " + what);
}

}  // namespace

void save_snapshot(const PromptIndex& index, std::ostream& out, std::string_view config_hash) {
  json medoids = json::array();
  for (const auto& c : index.clusters()) medoids.push_back(c.representative().id);
  json header{{"format", kFormat}, {"version", kVersion},     {"K", index.k()},
              {"capacity", index.capacity()}, {"D", index.dim()}, {"seed", index.seed()},
              {"size", index.size()},         {"medoids", medoids}};
  if (!config_hash.empty()) header["config_hash"] = config_hash;
  out << header.dump() << '\n';
  for (std::size_t c = 0; c < index.clusters().size(); ++c) {
    for (const auto& m : index.clusters()[c].members) {
      const json rec{{"id", m.id}, {"text", m.text}, {"cluster", c}, {"features", m.features}};
      out << rec.dump() << '\n';
    }
  }
}

PromptIndex load_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) bad_snapshot("missing header");
  json header;
  try {
    header = json::parse(line);
    if (header.at("format") != kFormat || header.at("version") != kVersion) bad_snapshot("unsupported format");
    const auto k = header.at("K").get<std::size_t>();
    const auto capacity = header.at("capacity").get<std::size_t>();
    const auto dim = header.at("D").get<std::size_t>();
    const auto seed = header.at("seed").get<std::uint64_t>();
    const auto size = header.at("size").get<std::size_t>();
    const auto medoids = header.at("medoids").get<std::vector<std::int64_t>>();
    if (medoids.size() != k) bad_snapshot("medoid list does not match K");

    std::vector<PromptCluster> clusters(k);
    std::vector<bool> has_medoid(k, false);
    std::size_t count = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      const auto c = rec.at("cluster").get<std::size_t>();
      if (c >= k) bad_snapshot("line " + std::to_string(line_no) + ": cluster out of range");
      PromptCandidate p{rec.at("id").get<std::int64_t>(), rec.at("text").get<std::string>(),
                        rec.at("features").get<FeatureVector>()};
      if (p.id == medoids[c]) {
        clusters[c].medoid = clusters[c].members.size();
        has_medoid[c] = true;
      }
      clusters[c].members.push_back(std::move(p));
      ++count;
    }
    if (count != size) bad_snapshot("record count does not match header");
    for (std::size_t c = 0; c < k; ++c) {
      if (!has_medoid[c]) bad_snapshot("cluster " + std::to_string(c) + " lacks its medoid");
    }
    return PromptIndex::from_clusters(std::move(clusters), capacity, dim, seed);
  } catch (const json::exception& e) {
    bad_snapshot(e.what());
  }
}

}  // namespace lptsim
