#include "ideolens/prediction.hpp"

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

void save_predictions_csv(const std::vector<Prediction>& preds,
                          const std::filesystem::path& path, std::uint64_t hash,
                          std::uint64_t seed) {
  std::string out = csv_meta_line(hash, seed);
  out += "user_id,party,pole,confidence,normalized_distance\n";
  for (const Prediction& p : preds) {
    out += csv_escape(p.user_id);
    out += ',' + csv_escape(p.party);
    out += ',' + csv_escape(p.pole);
    out += ',' + format_double(p.confidence);
    out += ',' + format_double(p.normalized_distance);
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  bool header_seen = false;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = csv_split(line);
    if (f.size() != 5)
      throw ParseError("predictions " + path.string() + " line " + std::to_string(lineno) +
                       ": expected 5 fields");
    Prediction p;
    p.user_id = f[0];
    p.party = f[1];
    p.pole = f[2];
    try {
      p.confidence = std::stod(f[3]);
      p.normalized_distance = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ParseError("predictions " + path.string() + " line " + std::to_string(lineno) +
                       ": bad number");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ideolens
