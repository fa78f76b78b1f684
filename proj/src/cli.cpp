#include "fp/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "fp/corpus.hpp"
#include "fp/errors.hpp"
#include "fp/finger_template.hpp"
#include "fp/fusion_eval.hpp"
#include "fp/text_io.hpp"

namespace fp {

namespace {

namespace fs = std::filesystem;

struct Globals {
  double dpi = kDefaultDpi;
  std::uint64_t seed = 1;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Opens path for writing, or returns nullptr for "-" (standard output).
std::unique_ptr<std::ofstream> open_out(const std::string &path) {
  if (path == "-")
    return nullptr;
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f)
    throw IoError("cannot write " + path);
  return f;
}

template <typename Fn> auto parse_feature(const fs::path &p, Fn parse) {
  std::istringstream in(read_file(p));
  try {
    return parse(in);
  } catch (const ParseError &e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

std::string feature_kind(const fs::path &p) {
  const std::string body = read_file(p);
  if (body.rfind("P5", 0) == 0)
    return "image";
  std::istringstream in(body);
  std::string tag;
  in >> tag;
  if (tag == "RIDGEFEAT" || tag == "MINUTIAE" || tag == "PORES")
    return tag;
  throw ParseError(p.string() + ": neither a P5 image nor a feature file");
}

void box_half_check(double b) {
  if (b != 6 && b != 8 && b != 10)
    throw std::invalid_argument("--box-half must be 6, 8 or 10");
}

int run_extract(const Globals &g, std::ostream &console, const std::string &image,
                const std::string &method_name_arg, const std::string &output) {
  const Method m = parse_method(method_name_arg);
  const GrayImage img = read_pgm(image, g.dpi);
  const auto file = open_out(output);
  std::ostream &out = file ? *file : console;
  if (m == Method::ridges) {
    write_ridge_feature(out, extract_ridge_features(img));
  } else {
    const Preprocessed pre = preprocess(img);
    if (m == Method::minutiae)
      write_minutiae(out, extract_minutiae(thin(pre.binary), pre.map));
    else
      write_pores(out, extract_pores(pre, m == Method::pores_iso
                                              ? PoreMethod::isotropic
                                              : PoreMethod::adaptive));
  }
  if (file && !*file)
    throw IoError("write failed for " + output);
  return 0;
}

int run_match(const Globals &g, std::ostream &out, const std::string &a,
              const std::string &b, const std::string &methods_arg,
              double box_half, const std::string &qridges,
              const std::string &rridges) {
  box_half_check(box_half);
  const auto methods = parse_methods(methods_arg);
  const std::string ka = feature_kind(a), kb = feature_kind(b);
  if (ka != kb)
    throw std::invalid_argument("cannot match a " + ka + " against a " + kb);

  std::array<std::optional<double>, 4> scores;
  if (ka == "image") {
    const FingerTemplate ta = build_template(read_pgm(a, g.dpi), methods);
    const FingerTemplate tb = build_template(read_pgm(b, g.dpi), methods);
    scores = compare_templates(ta, tb, methods, box_half);
  } else {
    if (methods.size() != 1)
      throw std::invalid_argument("feature files carry one method; pass it "
                                  "alone with --methods");
    const Method m = methods.front();
    const std::string expected = m == Method::ridges     ? "RIDGEFEAT"
                                 : m == Method::minutiae ? "MINUTIAE"
                                                         : "PORES";
    if (ka != expected)
      throw std::invalid_argument("method " + std::string(method_name(m)) +
                                  " needs " + expected + " files, got " + ka);
    auto &slot = scores[static_cast<std::size_t>(m)];
    if (m == Method::ridges) {
      slot = compare_ridge(parse_feature(a, read_ridge_feature),
                           parse_feature(b, read_ridge_feature), {}, g.dpi)
                 .value;
    } else if (m == Method::minutiae) {
      slot = compare_minutiae(parse_feature(a, read_minutiae),
                              parse_feature(b, read_minutiae), {}, g.dpi)
                 .value;
    } else {
      if (qridges.empty() || rridges.empty())
        throw std::invalid_argument("matching pore files needs "
                                    "--query-ridges and --reference-ridges");
      const PoreSet pa = parse_feature(a, read_pores);
      const PoreSet pb = parse_feature(b, read_pores);
      const PoreMethod want =
          m == Method::pores_iso ? PoreMethod::isotropic : PoreMethod::adaptive;
      if (pa.method != want || pb.method != want)
        throw std::invalid_argument("pore files were not extracted with " +
                                    std::string(method_name(m)));
      slot = compare_pores(parse_feature(qridges, read_ridge_feature), pa,
                           parse_feature(rridges, read_ridge_feature), pb,
                           at_dpi(box_half, g.dpi), {}, g.dpi)
                 .value;
    }
  }
  for (Method m : methods)
    out << method_name(m) << ' '
        << text::num(scores[static_cast<std::size_t>(m)].value_or(0.0)) << '\n';
  return 0;
}

int run_evaluate(const Globals &g, std::ostream &out, const std::string &root,
                 const std::string &methods_arg, double box_half,
                 const std::string &records_path, const std::string &roc_dir,
                 int samples_per_session) {
  box_half_check(box_half);
  const auto methods = parse_methods(methods_arg);
  const CorpusIndex corpus = index_corpus(root, g.dpi, samples_per_session);
  const auto records = run_protocol(corpus, methods, {box_half, g.jobs});
  {
    std::ofstream f(records_path);
    if (!f)
      throw IoError("cannot write " + records_path);
    write_records(f, records);
    if (!f)
      throw IoError("write failed for " + records_path);
  }
  const auto n_genuine = std::count_if(records.begin(), records.end(), [](auto &r) {
    return r.label == Label::genuine;
  });
  out << "genuine " << n_genuine << "\nimpostor "
      << records.size() - static_cast<std::size_t>(n_genuine) << '\n';
  if (!roc_dir.empty())
    fs::create_directories(roc_dir);
  for (Method m : methods) {
    const EvalReport rep = evaluate_method(records, m);
    out << "eer " << method_name(m) << ' ' << text::num(rep.eer) << '\n';
    if (!roc_dir.empty()) {
      const fs::path p = fs::path(roc_dir) / ("roc_" + std::string(method_name(m)) + ".csv");
      std::ofstream f(p);
      if (!f)
        throw IoError("cannot write " + p.string());
      write_roc(f, rep);
    }
  }
  return 0;
}

int run_fuse_search(const Globals &g, std::ostream &out,
                    const std::string &path, double step, bool holdout,
                    const std::string &methods_arg, const std::string &roc) {
  std::vector<ComparisonRecord> records;
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open " + path);
    try {
      records = read_records(in);
    } catch (const ParseError &e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  std::vector<Method> methods;
  if (!methods_arg.empty()) {
    methods = parse_methods(methods_arg);
  } else {
    for (Method m : kAllMethods)
      if (!records.empty() &&
          std::all_of(records.begin(), records.end(),
                      [m](const ComparisonRecord &r) { return r.score(m).has_value(); }))
        methods.push_back(m);
    if (methods.empty())
      throw CorpusShape(path + ": no method is scored on every record");
  }

  const auto [select, test] =
      holdout ? holdout_split(records) : std::pair{records, records};
  const auto [weights, selected] = grid_search_weights(select, methods, step, g.jobs);
  const EvalReport fused = holdout ? evaluate_fused(test, weights) : selected;

  for (Method m : methods)
    out << "eer " << method_name(m) << ' '
        << text::num(evaluate_method(test, m).eer) << '\n';
  out << "weights";
  for (const auto &[m, w] : weights)
    out << ' ' << method_name(m) << '=' << text::num(w);
  out << "\nfused_eer " << text::num(fused.eer) << '\n';
  if (holdout)
    out << "selection_eer " << text::num(selected.eer) << '\n';
  if (!roc.empty()) {
    std::ofstream f(roc);
    if (!f)
      throw IoError("cannot write " + roc);
    write_roc(f, fused);
  }
  return 0;
}

} // namespace

int cli_dispatch(int argc, const char *const *argv, std::ostream &out,
                 std::ostream &err) {
  CLI::App app{"Fingerprint fragment matching by fused minutiae, ridge and "
               "pore scores",
               "fpfuse"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--dpi", g.dpi, "Image resolution")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for synthetic corpora");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1, 1024));

  auto *extract = app.add_subcommand("extract", "Image to feature file");
  std::string ex_image, ex_method, ex_out = "-";
  extract->add_option("image", ex_image)->required();
  extract->add_option("--method", ex_method)
      ->required()
      ->check(CLI::IsMember({"ridges", "minutiae", "pores-iso", "pores-adapt"}));
  extract->add_option("-o,--output", ex_out, "Output path, - for stdout");

  auto *match = app.add_subcommand("match", "Score two images or feature files");
  std::string m_a, m_b, m_methods = "minutiae,ridges,pores-iso,pores-adapt";
  std::string m_qr, m_rr;
  double m_box = 6;
  match->add_option("query", m_a)->required();
  match->add_option("reference", m_b)->required();
  match->add_option("--methods", m_methods);
  match->add_option("--box-half", m_box);
  match->add_option("--query-ridges", m_qr, "RIDGEFEAT file aligning query pores");
  match->add_option("--reference-ridges", m_rr);

  auto *evaluate = app.add_subcommand("evaluate", "Run the comparison protocol");
  std::string e_root, e_methods = "minutiae,ridges,pores-iso,pores-adapt";
  std::string e_records = "records.csv", e_roc;
  double e_box = 6;
  int e_sps = 5;
  evaluate->add_option("corpus", e_root)->required();
  evaluate->add_option("--methods", e_methods);
  evaluate->add_option("--box-half", e_box);
  evaluate->add_option("--records", e_records, "Records CSV output");
  evaluate->add_option("--roc-dir", e_roc, "Directory for per-method ROC files");
  evaluate->add_option("--samples-per-session", e_sps)->check(CLI::PositiveNumber);

  auto *fuse_cmd = app.add_subcommand("fuse-search", "Search fusion weights");
  std::string f_path, f_methods, f_roc;
  double f_step = 0.05;
  bool f_holdout = false;
  fuse_cmd->add_option("records", f_path)->required();
  fuse_cmd->add_option("--step", f_step);
  fuse_cmd->add_flag("--holdout", f_holdout,
                     "Choose weights on half the fingers, report the other half");
  fuse_cmd->add_option("--methods", f_methods);
  fuse_cmd->add_option("--roc", f_roc, "ROC file for the fused score");

  auto *synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string s_out;
  SynthSpec spec;
  synth->add_option("out", s_out)->required();
  synth->add_option("--fingers", spec.n_fingers);
  synth->add_option("--samples-per-session", spec.samples_per_session);
  synth->add_option("--width", spec.width);
  synth->add_option("--height", spec.height);
  synth->add_option("--ridge-period", spec.ridge_period);
  synth->add_option("--pore-density", spec.pore_density);
  synth->add_option("--jitter", spec.jitter);
  synth->add_option("--rotation-range", spec.rotation_range);
  synth->add_option("--translation-range", spec.translation_range);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--distortion", spec.distortion);
  synth->add_option("--pore-dropout", spec.pore_dropout);
  synth->add_option("--crop", spec.crop);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "fpfuse: " << e.what() << '\n';
    return 1;
  }

  try {
    if (extract->parsed())
      return run_extract(g, out, ex_image, ex_method, ex_out);
    if (match->parsed())
      return run_match(g, out, m_a, m_b, m_methods, m_box, m_qr, m_rr);
    if (evaluate->parsed())
      return run_evaluate(g, out, e_root, e_methods, e_box, e_records, e_roc, e_sps);
    if (fuse_cmd->parsed())
      return run_fuse_search(g, out, f_path, f_step, f_holdout, f_methods, f_roc);
    if (synth->parsed()) {
      spec.seed = g.seed;
      spec.dpi = g.dpi;
      const auto index = generate_synthetic(spec, s_out, g.jobs);
      out << "wrote " << index.entries.size() << " images to " << s_out << '\n';
      return 0;
    }
  } catch (const std::invalid_argument &e) {
    err << "fpfuse: " << e.what() << '\n';
    return 1;
  } catch (const Error &e) {
    err << "fpfuse: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    err << "fpfuse: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

} // namespace fp
