// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/cli.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "patchcrypt/blockcipher.hpp"
#include "patchcrypt/embedding.hpp"
#include "patchcrypt/segmetrics.hpp"
#include "patchcrypt/tensorarchive.hpp"

namespace patchcrypt::cli {
namespace {

namespace fs = std::filesystem;

// I/O failures on user-supplied paths.
class FileError : public Error {
 public:
  using Error::Error;
};

// Bad combination of arguments detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("write failed");
}

// Prefixes an error with the file it concerns plus any position it carries.
std::string describe(const fs::path& path, const std::exception& e) {
  std::string where = path.string();
  if (const auto* img = dynamic_cast<const ImageFormatError*>(&e)) {
    where += ": byte " + std::to_string(img->offset());
  } else if (const auto* key = dynamic_cast<const KeyParseError*>(&e)) {
    where += ": position " + std::to_string(key->position());
  }
  return where + ": " + e.what();
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string lowercase_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Regular files in `dir` with extension `ext`, sorted by name.
std::vector<fs::path> list_files(const fs::path& dir, std::string_view ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && lowercase_extension(entry.path()) == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct KeyOptions {
  std::string key_file;
};

void add_key_option(CLI::App* cmd, KeyOptions& opts) {
  cmd->add_option("--key", opts.key_file,
                  "Key file (64 hex chars). Falls back to $PATCHCRYPT_KEY when omitted")
      ->check(CLI::ExistingFile);
}

// The --key flag wins over the environment variable.
SecretKey resolve_key(const KeyOptions& opts, const Io& io) {
  if (!opts.key_file.empty()) {
    fs::path path(opts.key_file);
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file(path);
    } catch (const FileError& e) {
      throw FileError(describe(path, e));
    }
    try {
      return parse_key_file(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const KeyParseError& e) {
      throw KeyParseError(describe(path, e), e.position());
    }
  }
  if (io.env_key) {
    try {
      return parse_key_file(*io.env_key);
    } catch (const KeyParseError& e) {
      throw KeyParseError(std::string(kKeyEnvVar) + ": position " +
                              std::to_string(e.position()) + ": " + e.what(),
                          e.position());
    }
  }
  throw UsageError(std::string("a key is required: pass --key <file> or set ") + kKeyEnvVar);
}

// --- keygen -----------------------------------------------------------------

struct KeygenOptions {
  std::string out;
  bool force = false;
};

int run_keygen(const KeygenOptions& opts, const Io& io) {
  const SecretKey key = keygen();
  const std::string line = key.hex() + "\n";
  int flags = O_WRONLY | O_CREAT | (opts.force ? O_TRUNC : O_EXCL);
  int fd = ::open(opts.out.c_str(), flags, 0600);
  if (fd < 0) {
    io.err << opts.out << ": " << std::strerror(errno)
           << (errno == EEXIST ? " (use --force to overwrite)" : "") << "\n";
    return kDataError;
  }
  // An existing file keeps its old mode under O_TRUNC; tighten it.
  ::fchmod(fd, 0600);
  ssize_t written = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size())) {
    io.err << opts.out << ": short write\n";
    return kDataError;
  }
  io.out << "wrote 256-bit key to " << opts.out << "\n";
  return kSuccess;
}

// --- encrypt / decrypt ------------------------------------------------------

struct CipherOptions {
  KeyOptions key;
  std::string in;
  std::string out;
  std::size_t patch_size = 16;
  unsigned jobs = 1;
};

int run_cipher(const CipherOptions& opts, bool encrypt, const Io& io) {
  const SecretKey key = resolve_key(opts.key, io);
  if (opts.patch_size == 0) throw UsageError("--patch-size must be at least 1");
  // Key schedule once for the whole batch.
  Permutation sigma = generate_permutation(key, 3 * opts.patch_size * opts.patch_size);
  if (!encrypt) sigma = invert(sigma);

  std::vector<std::pair<fs::path, fs::path>> jobs;
  const fs::path in(opts.in);
  const fs::path out(opts.out);
  if (fs::is_directory(in)) {
    if (fs::exists(out) && !fs::is_directory(out)) {
      throw UsageError("--in is a directory, so --out must be a directory too");
    }
    fs::create_directories(out);
    for (const auto& file : list_files(in, ".ppm")) jobs.emplace_back(file, out / file.filename());
  } else {
    if (fs::is_directory(out)) {
      jobs.emplace_back(in, out / in.filename());
    } else {
      jobs.emplace_back(in, out);
    }
  }

  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), opts.jobs, [&](std::size_t i) {
    const auto& [src, dst] = jobs[i];
    try {
      Image img = read_ppm(read_file(src));
      write_file(dst, write_ppm(permute_blocks(img, sigma, opts.patch_size)));
    } catch (const std::exception& e) {
      failures[i] = describe(src, e);
    }
  });

  std::size_t failed = 0;
  for (const auto& f : failures) {
    if (!f.empty()) {
      io.err << f << "\n";
      ++failed;
    }
  }
  io.out << (encrypt ? "encrypted " : "decrypted ") << (jobs.size() - failed) << " of "
         << jobs.size() << " file(s)\n";
  return failed == 0 ? kSuccess : kDataError;
}

// --- adapt-model / verify / inspect -----------------------------------------

struct ModelOptions {
  std::string weight_name{kDefaultWeightName};
  std::string bias_name{kDefaultBiasName};
  std::size_t patch_size = 0;  // 0: infer from a 4-axis kernel

  EmbeddingTensorNames names() const { return {weight_name, bias_name}; }
  std::optional<std::size_t> patch() const {
    return patch_size == 0 ? std::nullopt : std::optional<std::size_t>(patch_size);
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& opts) {
  cmd->add_option("--weight-name", opts.weight_name, "Patch-embedding weight tensor")
      ->capture_default_str();
  cmd->add_option("--bias-name", opts.bias_name, "Patch-embedding bias tensor")
      ->capture_default_str();
  cmd->add_option("--patch-size", opts.patch_size,
                  "Patch size P; required when the weight is stored as [D, 3*P*P] "
                  "(default: taken from a [D,3,P,P] kernel)");
}

TensorArchive load_archive(const fs::path& path) {
  try {
    return read_archive(read_file(path));
  } catch (const std::exception& e) {
    throw FileError(describe(path, e));
  }
}

struct AdaptOptions {
  KeyOptions key;
  ModelOptions model;
  std::string in;
  std::string out;
};

int run_adapt(const AdaptOptions& opts, const Io& io) {
  const SecretKey key = resolve_key(opts.key, io);
  const TensorArchive archive = load_archive(opts.in);
  TensorArchive adapted;
  try {
    adapted = adapt_archive(archive, key, opts.model.names(), opts.model.patch());
  } catch (const std::exception& e) {
    throw FileError(describe(opts.in, e));
  }
  write_file(opts.out, write_archive(adapted));
  const auto shape = embedding_shape(adapted, opts.model.weight_name, opts.model.patch());
  io.out << "adapted '" << opts.model.weight_name << "' (D=" << shape.dim
         << ", P=" << shape.patch_size << ") -> " << opts.out << "\n";
  return kSuccess;
}

struct VerifyOptions {
  KeyOptions key;
  ModelOptions model;
  std::string model_path;
  std::string image;
  double tol = 1e-9;
  double norm_mean = 0.5;
  double norm_std = 0.5;
  unsigned threads = 1;
};

int run_verify(const VerifyOptions& opts, const Io& io) {
  const SecretKey key = resolve_key(opts.key, io);
  const TensorArchive archive = load_archive(opts.model_path);
  const PatchEmbedding pe = [&] {
    try {
      return load_embedding(archive, opts.model.names(),
                            Normalization::uniform(opts.norm_mean, opts.norm_std),
                            opts.model.patch());
    } catch (const std::exception& e) {
      throw FileError(describe(opts.model_path, e));
    }
  }();
  Image img = [&] {
    try {
      return read_ppm(read_file(opts.image));
    } catch (const std::exception& e) {
      throw FileError(describe(opts.image, e));
    }
  }();
  EquivalenceReport report;
  try {
    report = verify_equivariance(pe, key, img, opts.tol, opts.threads);
  } catch (const GeometryError& e) {
    throw GeometryError(describe(opts.image, e));
  }
  io.out << report.to_json() << "\n";
  return report.pass ? kSuccess : kVerificationFailed;
}

struct InspectOptions {
  std::string in;
};

int run_inspect(const InspectOptions& opts, const Io& io) {
  const std::vector<std::uint8_t> bytes = [&] {
    try {
      return read_file(opts.in);
    } catch (const std::exception& e) {
      throw FileError(describe(opts.in, e));
    }
  }();
  TensorArchive archive;
  try {
    archive = read_archive(bytes);
  } catch (const std::exception& e) {
    throw FileError(describe(opts.in, e));
  }
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  io.out << opts.in << ": " << archive.records.size() << " tensor(s), header " << header_len
         << " bytes, data " << bytes.size() - 8 - header_len << " bytes\n";
  for (const auto& [k, v] : archive.metadata) io.out << "  meta  " << k << " = " << v << "\n";
  std::uint64_t offset = 0;
  for (const auto& r : archive.records) {
    io.out << "  " << r.name << "  " << dtype_name(r.dtype) << "[";
    for (std::size_t i = 0; i < r.shape.size(); ++i) io.out << (i ? "," : "") << r.shape[i];
    io.out << "]  [" << offset << ", " << offset + r.data.size() << ")\n";
    offset += r.data.size();
  }
  return kSuccess;
}

// --- eval -------------------------------------------------------------------

struct EvalOptions {
  std::string gt;
  std::string pred;
  std::size_t classes = 19;
  unsigned ignore = LabelMap::kIgnoreLabel;
  unsigned jobs = 1;
};

std::map<std::string, fs::path> files_by_stem(const fs::path& p) {
  std::map<std::string, fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& f : list_files(p, ".pgm")) out.emplace(f.stem().string(), f);
  } else {
    out.emplace(p.stem().string(), p);
  }
  return out;
}

int run_eval(const EvalOptions& opts, const Io& io) {
  if (opts.ignore > 255) throw UsageError("--ignore must be in 0..255");
  auto gt = files_by_stem(opts.gt);
  auto pred = files_by_stem(opts.pred);
  // Two single files are compared directly, whatever their names.
  if (!fs::is_directory(opts.gt) && !fs::is_directory(opts.pred)) {
    pred = {{gt.begin()->first, fs::path(opts.pred)}};
  }
  std::vector<std::string> unmatched;
  for (const auto& [stem, _] : gt) {
    if (!pred.contains(stem)) unmatched.push_back("no prediction for '" + stem + "'");
  }
  for (const auto& [stem, _] : pred) {
    if (!gt.contains(stem)) unmatched.push_back("no ground truth for '" + stem + "'");
  }
  if (!unmatched.empty()) {
    for (const auto& m : unmatched) io.err << m << "\n";
    return kDataError;
  }
  if (gt.empty()) {
    io.err << "no .pgm label maps found\n";
    return kDataError;
  }

  const auto ignore = static_cast<std::uint8_t>(opts.ignore);
  ConfusionMatrix total(opts.classes, ignore);
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& [stem, path] : gt) pairs.emplace_back(path, pred.at(stem));

  std::vector<ConfusionMatrix> partial(pairs.size(), ConfusionMatrix(opts.classes, ignore));
  std::vector<std::string> failures(pairs.size());
  parallel_for(pairs.size(), opts.jobs, [&](std::size_t i) {
    const auto& [g, p] = pairs[i];
    fs::path current = g;
    try {
      LabelMap gt_map = read_pgm_labels(read_file(g));
      current = p;
      LabelMap pred_map = read_pgm_labels(read_file(p));
      partial[i].accumulate(gt_map, pred_map);
    } catch (const std::exception& e) {
      failures[i] = describe(current, e);
    }
  });
  bool failed = false;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!failures[i].empty()) {
      io.err << failures[i] << "\n";
      failed = true;
    }
    total.merge(partial[i]);
  }
  if (failed) return kDataError;

  const MetricsReport report = compute(total);
  io.out << report.to_table() << report.to_json() << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, const Io& io) {
  CLI::App app{"Block-wise image encryption and patch-embedding adaptation toolkit",
               args.empty() ? "patchcrypt" : args.front()};
  app.require_subcommand(1);

  KeygenOptions keygen_opts;
  auto* keygen_cmd = app.add_subcommand("keygen", "Generate a 256-bit secret key file (mode 0600)");
  keygen_cmd->add_option("--out", keygen_opts.out, "Key file to create")->required();
  keygen_cmd->add_flag("--force", keygen_opts.force, "Overwrite an existing file");

  CipherOptions enc_opts;
  CipherOptions dec_opts;
  auto add_cipher = [&](const char* name, const char* desc, CipherOptions& o) {
    auto* cmd = app.add_subcommand(name, desc);
    add_key_option(cmd, o.key);
    cmd->add_option("--in", o.in, "Input .ppm file or directory")
        ->required()
        ->check(CLI::ExistingPath);
    cmd->add_option("--out", o.out, "Output file or directory (file names are preserved)")
        ->required();
    cmd->add_option("--patch-size,-p", o.patch_size, "Block size P (ViT patch size)")
        ->capture_default_str();
    cmd->add_option("--jobs,-j", o.jobs, "Files processed in parallel")->capture_default_str();
    return cmd;
  };
  auto* enc_cmd = add_cipher("encrypt", "Encrypt images block by block", enc_opts);
  auto* dec_cmd = add_cipher("decrypt", "Invert `encrypt` with the same key", dec_opts);

  AdaptOptions adapt_opts;
  auto* adapt_cmd = app.add_subcommand(
      "adapt-model", "Permute the patch-embedding weight of a .safetensors checkpoint");
  add_key_option(adapt_cmd, adapt_opts.key);
  adapt_cmd->add_option("--in", adapt_opts.in, "Plain checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  adapt_cmd->add_option("--out", adapt_opts.out, "Adapted checkpoint")->required();
  add_model_options(adapt_cmd, adapt_opts.model);

  VerifyOptions verify_opts;
  auto* verify_cmd = app.add_subcommand(
      "verify", "Check that adapted model + encrypted image reproduce the plain tokens");
  add_key_option(verify_cmd, verify_opts.key);
  verify_cmd->add_option("--model", verify_opts.model_path, "Plain .safetensors checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--image", verify_opts.image, "Plain .ppm image")
      ->required()
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--tol", verify_opts.tol, "Max absolute token difference")
      ->capture_default_str();
  verify_cmd->add_option("--norm-mean", verify_opts.norm_mean, "Input normalization mean")
      ->capture_default_str();
  verify_cmd->add_option("--norm-std", verify_opts.norm_std, "Input normalization std")
      ->capture_default_str();
  verify_cmd->add_option("--threads", verify_opts.threads, "Worker threads")
      ->capture_default_str();
  add_model_options(verify_cmd, verify_opts.model);

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Segmentation metrics (aAcc, mAcc, mIoU) over .pgm label maps paired by stem");
  eval_cmd->add_option("--gt", eval_opts.gt, "Ground-truth .pgm directory or file")
      ->required()
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--pred", eval_opts.pred, "Prediction .pgm directory or file")
      ->required()
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--classes,-k", eval_opts.classes, "Number of classes K")->required();
  eval_cmd->add_option("--ignore", eval_opts.ignore, "Ground-truth label excluded from counts")
      ->capture_default_str();
  eval_cmd->add_option("--jobs,-j", eval_opts.jobs, "Files processed in parallel")
      ->capture_default_str();

  InspectOptions inspect_opts;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a .safetensors header");
  inspect_cmd->add_option("--in,in", inspect_opts.in, "Archive")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend());
    if (!rest.empty()) rest.pop_back();  // program name
    app.parse(std::move(rest));
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, io.out, io.err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*keygen_cmd) return run_keygen(keygen_opts, io);
    if (*enc_cmd) return run_cipher(enc_opts, true, io);
    if (*dec_cmd) return run_cipher(dec_opts, false, io);
    if (*adapt_cmd) return run_adapt(adapt_opts, io);
    if (*verify_cmd) return run_verify(verify_opts, io);
    if (*eval_cmd) return run_eval(eval_opts, io);
    if (*inspect_cmd) return run_inspect(inspect_opts, io);
  } catch (const UsageError& e) {
    io.err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace patchcrypt::cli
