#include "fp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "fp/errors.hpp"
#include "fp/text_io.hpp"

namespace fp {

namespace fs = std::filesystem;

std::string CorpusEntry::id() const {
  return finger + "_" + std::to_string(session) + "_" + std::to_string(sample);
}

std::vector<std::string> CorpusIndex::fingers() const {
  std::vector<std::string> out;
  for (const auto &e : entries)
    if (out.empty() || out.back() != e.finger)
      out.push_back(e.finger);
  return out;
}

const CorpusEntry &CorpusIndex::at(const std::string &finger, int session,
                                   int sample) const {
  const auto key = std::tie(finger, session, sample);
  const auto it = std::lower_bound(
      entries.begin(), entries.end(), key,
      [](const CorpusEntry &e, const auto &k) {
        return std::tie(e.finger, e.session, e.sample) < k;
      });
  if (it == entries.end() || it->finger != finger || it->session != session ||
      it->sample != sample)
    throw std::out_of_range("no corpus entry " + finger + "_" +
                            std::to_string(session) + "_" +
                            std::to_string(sample));
  return *it;
}

namespace {

std::vector<CorpusEntry> scan_directory(const fs::path &root) {
  static const std::regex name_re(R"((.+)_([0-9]+)_([0-9]+)\.pgm)");
  std::vector<CorpusEntry> out;
  std::error_code ec;
  for (const auto &de : fs::directory_iterator(root, ec)) {
    if (!de.is_regular_file())
      continue;
    const std::string name = de.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, name_re))
      continue;
    out.push_back({m[1].str(), std::stoi(m[2].str()), std::stoi(m[3].str()),
                   de.path()});
  }
  if (ec)
    throw IoError("cannot list corpus directory " + root.string() + ": " +
                  ec.message());
  return out;
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    cells.push_back(cell);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

std::vector<CorpusEntry> read_manifest(const fs::path &root,
                                       const fs::path &manifest) {
  std::ifstream in(manifest);
  if (!in)
    throw IoError("cannot open " + manifest.string());
  std::vector<CorpusEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto cells = split_csv(line);
    if (lineno == 1 && !cells.empty() && cells[0] == "finger")
      continue;
    if (cells.size() != 4)
      throw ParseError(manifest.string() + ":" + std::to_string(lineno) +
                       ": expected finger,session,sample,path");
    out.push_back({cells[0],
                   static_cast<int>(text::parse_int(cells[1], "session")),
                   static_cast<int>(text::parse_int(cells[2], "sample")),
                   root / cells[3]});
  }
  return out;
}

} // namespace

CorpusIndex index_corpus(const fs::path &root, double dpi,
                         int samples_per_session, bool validate_images) {
  if (samples_per_session < 1)
    throw std::invalid_argument("samples_per_session must be positive");
  if (!fs::is_directory(root))
    throw IoError("corpus root " + root.string() + " is not a directory");

  const fs::path manifest = root / "manifest.csv";
  CorpusIndex index;
  index.dpi = dpi;
  index.samples_per_session = samples_per_session;
  index.entries = fs::exists(manifest) ? read_manifest(root, manifest)
                                       : scan_directory(root);
  if (index.entries.empty())
    throw CorpusShape("no images named <finger>_<session>_<sample>.pgm in " +
                      root.string());

  std::sort(index.entries.begin(), index.entries.end(),
            [](const CorpusEntry &a, const CorpusEntry &b) {
              return std::tie(a.finger, a.session, a.sample) <
                     std::tie(b.finger, b.session, b.sample);
            });

  std::map<std::string, std::vector<const CorpusEntry *>> by_finger;
  for (const auto &e : index.entries)
    by_finger[e.finger].push_back(&e);
  for (const auto &[finger, list] : by_finger) {
    for (int session = 1; session <= 2; ++session)
      for (int sample = 1; sample <= samples_per_session; ++sample) {
        const auto n = std::count_if(list.begin(), list.end(), [&](auto *e) {
          return e->session == session && e->sample == sample;
        });
        if (n == 0)
          throw CorpusShape("finger " + finger + " is missing session " +
                            std::to_string(session) + " sample " +
                            std::to_string(sample));
        if (n > 1)
          throw CorpusShape("finger " + finger + " has duplicate " +
                            finger + "_" + std::to_string(session) + "_" +
                            std::to_string(sample));
      }
    if (list.size() != static_cast<std::size_t>(2 * samples_per_session))
      throw CorpusShape("finger " + finger + " has " +
                        std::to_string(list.size()) + " images, expected " +
                        std::to_string(2 * samples_per_session));
  }

  if (validate_images)
    for (const auto &e : index.entries)
      read_pgm(e.image_path, dpi);
  return index;
}

} // namespace fp
