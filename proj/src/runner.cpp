#include "genrec/runner.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace genrec {

namespace {

void put_u32(std::ostream &os, std::uint32_t v)
{
  char b[4];
  for (int i = 0; i < 4; ++i) { b[i] = char((v >> (8 * i)) & 0xFF); }
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream &is)
{
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char *>(b), 4)) { throw IoError("weights file: truncated header"); }
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

void put_f64(std::ostream &os, double v)
{
  auto const bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) { b[i] = char((bits >> (8 * i)) & 0xFF); }
  os.write(b, 8);
}

std::string trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) { return {}; }
  auto const e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto const pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) { break; }
    start = pos + 1;
  }
  return out;
}

std::size_t to_size(std::string const &s, std::string_view key)
{
  try {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      throw std::invalid_argument(s);
    }
    return std::size_t(std::stoull(s));
  } catch (std::exception const &) {
    throw RangeError("config: '" + std::string(key) + "' expects a non-negative integer, got '" + s + "'");
  }
}

double to_double(std::string const &s, std::string_view key)
{
  try {
    std::size_t used = 0;
    auto const v = std::stod(s, &used);
    if (used != s.size()) { throw std::invalid_argument(s); }
    return v;
  } catch (std::exception const &) {
    throw RangeError("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
}

bool to_bool(std::string const &s, std::string_view key)
{
  if (s == "true" || s == "1" || s == "yes") { return true; }
  if (s == "false" || s == "0" || s == "no") { return false; }
  throw RangeError("config: '" + std::string(key) + "' expects true/false, got '" + s + "'");
}

std::string join_sizes(std::vector<std::size_t> const &v, std::size_t offset = 0)
{
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) { out += (i ? "," : "") + std::to_string(v[i] + offset); }
  return out;
}

std::string format_double(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_text(fs::path const &path, std::string const &text)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open '" + path.string() + "' for writing"); }
  os << text;
  if (!os) { throw IoError("write failed for '" + path.string() + "'"); }
}

std::string frame_name(std::size_t t, std::size_t channels)
{
  std::ostringstream os;
  os << "frame_" << std::setw(3) << std::setfill('0') << t << (channels == 1 ? ".pgm" : ".ppm");
  return os.str();
}

// Training sequence for pre-fitting: same kind and size, different content.
SequenceSpec prefit_spec(SequenceSpec spec)
{
  spec.seed += 1;
  spec.sprite += 1;
  if (spec.kind == SequenceKind::color_wheel) {
    spec.slices = std::max<std::size_t>(2, spec.slices / 2);
    spec.degrees_per_frame *= 3.0;
  }
  return spec;
}

} // namespace

void write_weights(std::ostream &os, Weights const &weights)
{
  auto const &arch = weights.architecture();
  os.write(kWeightsMagic.data(), std::streamsize(kWeightsMagic.size()));
  put_u32(os, std::uint32_t(arch.latent_dim));
  put_u32(os, std::uint32_t(arch.base_channels));
  put_u32(os, std::uint32_t(arch.base_size));
  put_u32(os, std::uint32_t(arch.layer_count()));
  for (auto c : arch.deconv_channels) { put_u32(os, std::uint32_t(c)); }
  put_u32(os, std::uint32_t(arch.output_channels()));
  for (double v : weights.flatten()) { put_f64(os, v); }
  if (!os) { throw IoError("weights file: write failed"); }
}

Weights read_weights(std::istream &is)
{
  std::string magic(kWeightsMagic.size(), '\0');
  if (!is.read(magic.data(), std::streamsize(magic.size())) || magic != kWeightsMagic) {
    throw IoError("weights file: bad magic");
  }
  Architecture arch;
  arch.latent_dim = get_u32(is);
  arch.base_channels = get_u32(is);
  arch.base_size = get_u32(is);
  std::uint32_t const layers = get_u32(is);
  if (layers == 0 || layers > 16) { throw IoError("weights file: implausible layer count"); }
  for (std::uint32_t l = 0; l < layers; ++l) { arch.deconv_channels.push_back(get_u32(is)); }
  if (get_u32(is) != arch.output_channels()) { throw IoError("weights file: output channel field disagrees"); }
  arch.validate();
  std::size_t const count = param_count(arch);
  std::vector<double> payload(count);
  std::vector<unsigned char> raw(count * 8);
  if (!is.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size()))) {
    throw IoError("weights file: payload shorter than the architecture requires");
  }
  if (is.peek() != std::char_traits<char>::eof()) { throw IoError("weights file: trailing bytes after payload"); }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) { bits |= std::uint64_t(raw[i * 8 + std::size_t(b)]) << (8 * b); }
    payload[i] = std::bit_cast<double>(bits);
  }
  auto w = Weights::unflatten(std::move(arch), payload);
  if (!w.all_finite()) { throw IoError("weights file: non-finite values"); }
  return w;
}

void save_weights(fs::path const &path, Weights const &weights)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open '" + path.string() + "' for writing"); }
  write_weights(os, weights);
}

Weights load_weights(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open weights file '" + path.string() + "'"); }
  try {
    return read_weights(is);
  } catch (IoError const &e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::uint8_t to_byte(double v)
{
  double const b = std::floor((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5 + 0.5);
  return std::uint8_t(std::clamp(b, 0.0, 255.0));
}

double from_byte(std::uint8_t b) { return double(b) / 127.5 - 1.0; }

void write_frame(fs::path const &path, Tensor const &frame)
{
  if (frame.rank() != 3 || (frame.dim(0) != 1 && frame.dim(0) != 3)) {
    throw ShapeError("write_frame: expected a 1- or 3-channel C × H × W frame");
  }
  std::size_t const c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open '" + path.string() + "' for writing"); }
  os << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  std::vector<char> bytes(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) { bytes[(y * w + x) * c + k] = char(to_byte(frame[(k * h + y) * w + x])); }
    }
  }
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) { throw IoError("write failed for '" + path.string() + "'"); }
}

Tensor read_frame(fs::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw IoError("cannot open frame '" + path.string() + "'"); }
  auto token = [&]() {
    std::string t;
    while (is) {
      int const ch = is.get();
      if (ch == '#') {
        std::string rest;
        std::getline(is, rest);
      } else if (std::isspace(ch)) {
        if (!t.empty()) { break; }
      } else if (ch != EOF) {
        t += char(ch);
      }
    }
    return t;
  };
  std::string const magic = token();
  if (magic != "P5" && magic != "P6") { throw IoError(path.string() + ": not a binary PGM/PPM file"); }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (std::exception const &) {
    throw IoError(path.string() + ": malformed header");
  }
  if (maxval != 255 || w == 0 || h == 0) { throw IoError(path.string() + ": only 8-bit images are supported"); }
  std::size_t const c = magic == "P5" ? 1 : 3;
  std::vector<unsigned char> bytes(c * h * w);
  if (!is.read(reinterpret_cast<char *>(bytes.data()), std::streamsize(bytes.size()))) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  Tensor frame({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) { frame[(k * h + y) * w + x] = from_byte(bytes[(y * w + x) * c + k]); }
    }
  }
  return frame;
}

void write_sequence(fs::path const &dir, VideoSequence const &seq)
{
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# " << kVersion << '\n';
  manifest << "kind = " << to_string(seq.spec.kind) << '\n';
  manifest << "frames = " << seq.spec.frames << '\n';
  manifest << "size = " << seq.spec.size << '\n';
  manifest << "deg_per_frame = " << format_double(seq.spec.degrees_per_frame) << '\n';
  manifest << "slices = " << seq.spec.slices << '\n';
  manifest << "velocity = " << seq.spec.velocity[0] << ',' << seq.spec.velocity[1] << '\n';
  manifest << "sprite = " << seq.spec.sprite << '\n';
  manifest << "seed = " << seq.spec.seed << '\n';
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    auto const name = frame_name(t, seq.frames[t].dim(0));
    write_frame(dir / name, seq.frames[t]);
    manifest << "# " << name << '\n';
  }
  write_text(dir / "manifest.txt", manifest.str());
}

std::vector<Tensor> read_frames(fs::path const &dir)
{
  if (!fs::is_directory(dir)) { throw IoError("input directory '" + dir.string() + "' does not exist"); }
  std::vector<fs::path> files;
  for (auto const &entry : fs::directory_iterator(dir)) {
    auto const name = entry.path().filename().string();
    auto const ext = entry.path().extension().string();
    if (name.rfind("frame_", 0) == 0 && (ext == ".pgm" || ext == ".ppm")) { files.push_back(entry.path()); }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) { throw IoError("no frame_*.pgm or frame_*.ppm files in '" + dir.string() + "'"); }
  std::vector<Tensor> frames;
  for (auto const &f : files) {
    frames.push_back(read_frame(f));
    if (frames.back().shape() != frames.front().shape()) { throw IoError(f.string() + ": frame shape differs"); }
  }
  return frames;
}

ConfigMap parse_config(std::istream &is)
{
  ConfigMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto const hash = line.find('#'); hash != std::string::npos) { line.erase(hash); }
    auto const body = trim(line);
    if (body.empty()) { continue; }
    auto const eq = body.find('=');
    if (eq == std::string::npos) { throw RangeError("config line " + std::to_string(lineno) + ": expected key = value"); }
    auto key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) { throw RangeError("config line " + std::to_string(lineno) + ": empty key"); }
    map[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return map;
}

ConfigMap load_config(fs::path const &path)
{
  std::ifstream is(path);
  if (!is) { throw IoError("cannot open config '" + path.string() + "'"); }
  return parse_config(is);
}

MeasureSpec MeasureSpec::parse(std::string_view text)
{
  MeasureSpec s;
  auto const colon = text.find(':');
  auto const head = trim(text.substr(0, colon));
  std::string const arg = colon == std::string_view::npos ? "" : trim(text.substr(colon + 1));
  if (head == "identity" && arg.empty()) {
    s.kind = MeasurementKind::identity;
  } else if (head == "gaussian" && !arg.empty()) {
    s.kind = MeasurementKind::gaussian_dense;
    s.rows = to_size(arg, "measure");
    if (s.rows == 0) { throw RangeError("measure: gaussian needs m > 0"); }
  } else if (head == "mask" && !arg.empty()) {
    s.kind = MeasurementKind::pixel_mask;
    s.keep_fraction = to_double(arg, "measure");
    if (!(s.keep_fraction > 0.0 && s.keep_fraction <= 1.0)) { throw RangeError("measure: mask fraction must be in (0, 1]"); }
  } else {
    throw RangeError("measure: expected identity, gaussian:<m> or mask:<p>, got '" + std::string(text) + "'");
  }
  return s;
}

std::string MeasureSpec::describe() const
{
  switch (kind) {
  case MeasurementKind::identity: return "identity";
  case MeasurementKind::gaussian_dense: return "gaussian:" + std::to_string(rows);
  case MeasurementKind::pixel_mask: return "mask:" + format_double(keep_fraction);
  }
  return "identity";
}

std::vector<MeasurementOperator> make_operators(MeasureSpec const &spec, std::size_t n, std::size_t frames,
                                                SeededRng &rng, bool shared_mask)
{
  std::vector<MeasurementOperator> ops;
  for (std::size_t t = 0; t < frames; ++t) {
    switch (spec.kind) {
    case MeasurementKind::identity: ops.push_back(MeasurementOperator::identity(n)); break;
    case MeasurementKind::gaussian_dense: ops.push_back(MeasurementOperator::gaussian(spec.rows, n, rng)); break;
    case MeasurementKind::pixel_mask:
      ops.push_back(shared_mask && t > 0 ? ops.front() : make_mask(n, spec.keep_fraction, rng));
      break;
    }
  }
  return ops;
}

std::vector<std::size_t> parse_frame_list(std::string_view text)
{
  std::vector<std::size_t> out;
  if (trim(text).empty()) { return out; }
  for (auto const &part : split(text, ',')) {
    auto const dash = part.find('-');
    std::size_t lo = 0, hi = 0;
    if (dash == std::string::npos) {
      lo = hi = to_size(part, "frame list");
    } else {
      lo = to_size(trim(std::string_view(part).substr(0, dash)), "frame list");
      hi = to_size(trim(std::string_view(part).substr(dash + 1)), "frame list");
    }
    if (lo == 0 || hi < lo) { throw RangeError("frame list: ranges are 1-based and ascending, got '" + part + "'"); }
    for (std::size_t f = lo; f <= hi; ++f) {
      if (std::find(out.begin(), out.end(), f - 1) == out.end()) { out.push_back(f - 1); }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view text)
{
  std::vector<std::size_t> out;
  for (auto const &part : split(text, ',')) { out.push_back(to_size(part, "list")); }
  return out;
}

ExperimentConfig ExperimentConfig::from_map(ConfigMap const &map)
{
  ExperimentConfig c;
  auto get = [&](char const *key) -> std::optional<std::string> {
    auto it = map.find(key);
    return it == map.end() ? std::nullopt : std::optional(it->second);
  };
  static constexpr std::array known{
      "input",     "kind",          "frames",     "size",        "deg_per_frame", "slices",        "velocity",
      "sprite",    "arch",          "latent_dim", "base_channels", "base_size",   "deconv_channels", "output_channels",
      "measure",   "noise_std",     "shared_mask", "init",       "prefit_epochs", "mode",          "constraint",
      "lambda",    "beta",          "lr_z",       "lr_gamma",    "epochs",        "tol",           "window",
      "holdout",   "groups",        "restarts",   "threads",     "output",        "seed"};
  for (auto const &[key, value] : map) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw RangeError("config: unknown key '" + key + "'");
    }
  }

  c.seed = get("seed") ? to_size(*get("seed"), "seed") : default_seed();
  if (auto v = get("input"); v && !v->empty()) { c.input_dir = fs::path(*v); }
  if (auto v = get("kind")) { c.sequence = SequenceSpec::defaults(parse_sequence_kind(*v)); }
  if (auto v = get("frames")) { c.sequence.frames = to_size(*v, "frames"); }
  if (auto v = get("size")) { c.sequence.size = to_size(*v, "size"); }
  if (auto v = get("deg_per_frame")) { c.sequence.degrees_per_frame = to_double(*v, "deg_per_frame"); }
  if (auto v = get("slices")) { c.sequence.slices = to_size(*v, "slices"); }
  if (auto v = get("velocity")) {
    auto const parts = split(*v, ',');
    if (parts.size() != 2) { throw RangeError("config: velocity expects vx,vy"); }
    c.sequence.velocity = {int(std::stoi(parts[0])), int(std::stoi(parts[1]))};
  }
  if (auto v = get("sprite")) { c.sequence.sprite = to_size(*v, "sprite"); }
  c.sequence.seed = c.seed;

  if (auto v = get("arch")) { c.preset = *v; }
  c.architecture = Architecture::preset(c.preset);
  if (auto v = get("latent_dim")) { c.architecture.latent_dim = to_size(*v, "latent_dim"); }
  if (auto v = get("base_channels")) { c.architecture.base_channels = to_size(*v, "base_channels"); }
  if (auto v = get("base_size")) { c.architecture.base_size = to_size(*v, "base_size"); }
  if (auto v = get("deconv_channels")) { c.architecture.deconv_channels = parse_size_list(*v); }
  if (auto v = get("output_channels")) {
    c.architecture = c.architecture.with_output_channels(to_size(*v, "output_channels"));
  }
  c.architecture.validate();

  if (auto v = get("measure")) { c.measure = MeasureSpec::parse(*v); }
  if (auto v = get("noise_std")) { c.noise_std = to_double(*v, "noise_std"); }
  if (auto v = get("shared_mask")) { c.shared_mask = to_bool(*v, "shared_mask"); }
  if (auto v = get("init")) { c.init = *v; }
  if (auto v = get("prefit_epochs")) { c.prefit_epochs = to_size(*v, "prefit_epochs"); }

  SolverConfig &s = c.solver;
  s.seed = c.seed;
  if (auto v = get("mode")) {
    if (*v == "joint") {
      s.mode = SolverMode::joint;
    } else if (*v == "latent" || *v == "latent_only") {
      s.mode = SolverMode::latent_only;
    } else {
      throw RangeError("config: mode must be joint or latent, got '" + *v + "'");
    }
  }
  if (auto v = get("constraint")) {
    auto const open = v->find('(');
    std::string const name = trim(std::string_view(*v).substr(0, open));
    std::vector<std::size_t> args;
    if (open != std::string::npos) {
      auto const close = v->find(')', open);
      if (close == std::string::npos) { throw RangeError("config: unbalanced constraint '" + *v + "'"); }
      args = parse_size_list(std::string_view(*v).substr(open + 1, close - open - 1));
    }
    if (name == "none" && args.empty()) {
      s.constraint = Constraint::none();
    } else if (name == "rank" && args.size() == 1) {
      s.constraint = Constraint::rank(args[0]);
    } else if (name == "affine" && args.size() == 1) {
      s.constraint = Constraint::affine(args[0]);
    } else if (name == "grouped" && args.size() == 2) {
      s.constraint = Constraint::grouped(args[0], args[1]);
    } else {
      throw RangeError("config: constraint must be none, rank(r), affine(d) or grouped(g,d), got '" + *v + "'");
    }
  }
  if (auto v = get("lambda")) { s.similarity_lambda = to_double(*v, "lambda"); }
  if (auto v = get("beta")) {
    s.similarity_beta.clear();
    for (auto const &part : split(*v, ',')) { s.similarity_beta.push_back(to_double(part, "beta")); }
  }
  if (auto v = get("lr_z")) { s.lr_z = to_double(*v, "lr_z"); }
  if (auto v = get("lr_gamma")) { s.lr_gamma = to_double(*v, "lr_gamma"); }
  if (auto v = get("epochs")) { s.epochs = to_size(*v, "epochs"); }
  if (auto v = get("tol")) { s.tol = to_double(*v, "tol"); }
  if (auto v = get("window")) { s.window = to_size(*v, "window"); }
  if (auto v = get("holdout")) { s.holdout = parse_frame_list(*v); }
  if (auto v = get("groups")) {
    s.groups = parse_size_list(*v);
    for (auto &g : s.groups) {
      if (g == 0) { throw RangeError("config: groups lists 1-based first frames"); }
      --g;
    }
  }
  if (auto v = get("restarts")) { s.restarts = to_size(*v, "restarts"); }
  if (auto v = get("threads")) { s.threads = to_size(*v, "threads"); }
  if (auto v = get("output")) { c.output_dir = fs::path(*v); }
  return c;
}

std::string ExperimentConfig::to_text(bool include_output) const
{
  std::ostringstream os;
  auto const &a = architecture;
  if (input_dir) { os << "input = " << input_dir->string() << '\n'; }
  os << "kind = " << to_string(sequence.kind) << '\n';
  os << "frames = " << sequence.frames << '\n';
  os << "size = " << sequence.size << '\n';
  os << "deg_per_frame = " << format_double(sequence.degrees_per_frame) << '\n';
  os << "slices = " << sequence.slices << '\n';
  os << "velocity = " << sequence.velocity[0] << ',' << sequence.velocity[1] << '\n';
  os << "sprite = " << sequence.sprite << '\n';
  os << "arch = " << preset << '\n';
  os << "latent_dim = " << a.latent_dim << '\n';
  os << "base_channels = " << a.base_channels << '\n';
  os << "base_size = " << a.base_size << '\n';
  os << "deconv_channels = " << join_sizes(a.deconv_channels) << '\n';
  os << "measure = " << measure.describe() << '\n';
  os << "noise_std = " << format_double(noise_std) << '\n';
  os << "shared_mask = " << (shared_mask ? "true" : "false") << '\n';
  os << "init = " << init << '\n';
  os << "prefit_epochs = " << prefit_epochs << '\n';
  os << "mode = " << (solver.mode == SolverMode::joint ? "joint" : "latent") << '\n';
  os << "constraint = " << solver.constraint.describe() << '\n';
  os << "lambda = " << format_double(solver.similarity_lambda) << '\n';
  if (!solver.similarity_beta.empty()) {
    os << "beta = ";
    for (std::size_t i = 0; i < solver.similarity_beta.size(); ++i) {
      os << (i ? "," : "") << format_double(solver.similarity_beta[i]);
    }
    os << '\n';
  }
  os << "lr_z = " << format_double(solver.lr_z) << '\n';
  os << "lr_gamma = " << format_double(solver.lr_gamma) << '\n';
  os << "epochs = " << solver.epochs << '\n';
  os << "tol = " << format_double(solver.tol) << '\n';
  os << "window = " << solver.window << '\n';
  os << "holdout = " << join_sizes(solver.holdout, 1) << '\n';
  os << "groups = " << join_sizes(solver.groups, 1) << '\n';
  os << "restarts = " << solver.restarts << '\n';
  os << "threads = " << solver.threads << '\n';
  if (include_output) { os << "output = " << output_dir.string() << '\n'; }
  os << "seed = " << seed << '\n';
  return os.str();
}

std::uint64_t default_seed()
{
  if (char const *env = std::getenv("GENREC_SEED"); env && *env) {
    try {
      return to_size(env, "GENREC_SEED");
    } catch (RangeError const &) {
      throw RangeError("GENREC_SEED must be a non-negative integer");
    }
  }
  return 0;
}

void write_residuals_csv(std::ostream &os, std::vector<double> const &history)
{
  os << "epoch,data_loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) { os << e << ',' << std::setprecision(17) << history[e] << '\n'; }
}

double nearest_copy_psnr(std::span<Tensor const> truth, std::span<std::size_t const> holdout)
{
  if (holdout.empty()) { return 0.0; }
  auto held = [&](std::size_t t) { return std::find(holdout.begin(), holdout.end(), t) != holdout.end(); };
  double acc = 0.0;
  for (std::size_t h : holdout) {
    std::optional<std::size_t> best;
    for (std::size_t d = 1; d < truth.size() && !best; ++d) {
      if (h >= d && !held(h - d)) {
        best = h - d;
      } else if (h + d < truth.size() && !held(h + d)) {
        best = h + d;
      }
    }
    if (!best) { throw RangeError("nearest_copy_psnr: no observed frame"); }
    acc += psnr(truth[h], truth[*best]);
  }
  return acc / double(holdout.size());
}

ExperimentOutcome run_experiment(ExperimentConfig const &config)
{
  ExperimentOutcome out;
  SeededRng root(config.seed);

  if (config.input_dir) {
    out.truth = read_frames(*config.input_dir);
  } else {
    out.truth = make_sequence(config.sequence).frames;
  }
  auto const &arch = config.architecture;
  if (out.truth.front().shape() != arch.output_shape()) {
    throw ShapeError("frames are " + std::to_string(out.truth.front().dim(0)) + "×" +
                     std::to_string(out.truth.front().dim(1)) + "×" + std::to_string(out.truth.front().dim(2)) +
                     " but the generator emits " + std::to_string(arch.output_channels()) + "×" +
                     std::to_string(arch.output_size()) + "×" + std::to_string(arch.output_size()));
  }

  SeededRng meas_rng = root.split(1);
  auto ops = make_operators(config.measure, arch.output_length(), out.truth.size(), meas_rng, config.shared_mask);
  auto const meas = measure_sequence(out.truth, std::move(ops), config.noise_std, meas_rng);

  Weights init;
  if (config.init == "random" || config.init == "prefit") {
    SeededRng init_rng = root.split(3);
    init = Weights::random(arch, init_rng);
    if (config.init == "prefit") {
      SeededRng prefit_rng = root.split(4);
      auto const train = make_sequence(prefit_spec(config.sequence));
      SolverConfig pc = config.solver;
      pc.constraint = Constraint::none();
      pc.similarity_lambda = 1.0;
      pc.holdout.clear();
      pc.epochs = config.prefit_epochs;
      pc.restarts = 1;
      init = prefit(init, train.frames, pc, prefit_rng);
    }
  } else {
    init = load_weights(config.init);
    if (!(init.architecture() == arch)) { throw ShapeError("weights file architecture does not match the config"); }
  }

  SeededRng solver_rng = root.split(2);
  out.result = run(config.solver, meas, init, solver_rng);
  attach_metrics(out.result, out.truth);

  fs::path const &dir = config.output_dir;
  fs::create_directories(dir / "frames");
  for (std::size_t t = 0; t < out.result.frames.size(); ++t) {
    write_frame(dir / "frames" / frame_name(t, arch.output_channels()), out.result.frames[t]);
  }
  {
    std::ostringstream os;
    write_metrics_csv(os, *out.result.metrics);
    write_text(dir / "metrics.csv", os.str());
  }
  {
    std::ostringstream os;
    write_residuals_csv(os, out.result.residual_history);
    write_text(dir / "residuals.csv", os.str());
  }
  save_weights(dir / "weights.bin", out.result.weights);
  {
    std::ostringstream os;
    write_basis_csv(os, out.result.basis);
    write_text(dir / "latent_basis.csv", os.str());
  }

  auto const &holdout = config.solver.holdout;
  if (!holdout.empty() && config.solver.constraint.is_line()) {
    out.held_out = interpolate_holdout(out.result, holdout);
    fs::create_directories(dir / "interpolated");
    std::ostringstream os;
    os << "frame_index,position,mse,psnr\n";
    double acc = 0.0;
    for (auto const &h : out.held_out) {
      write_frame(dir / "interpolated" / frame_name(h.index, arch.output_channels()), h.frame);
      double const p = psnr(out.truth[h.index], h.frame);
      acc += p;
      os << h.index << ',' << std::setprecision(17) << h.position << ',' << mse(out.truth[h.index], h.frame) << ','
         << p << '\n';
    }
    out.holdout_psnr = acc / double(out.held_out.size());
    out.baseline_psnr = nearest_copy_psnr(out.truth, holdout);
    write_text(dir / "holdout.csv", os.str());
  }

  std::ostringstream manifest;
  manifest << "# " << kVersion << '\n' << config.to_text(false);
  manifest << "# final_loss = " << format_double(out.result.final_loss) << '\n';
  manifest << "# epochs_run = " << out.result.residual_history.size() << '\n';
  manifest << "# mean_psnr = " << format_double(out.result.metrics->mean_psnr) << '\n';
  if (out.holdout_psnr) {
    manifest << "# holdout_psnr = " << format_double(*out.holdout_psnr) << '\n';
    manifest << "# nearest_copy_psnr = " << format_double(*out.baseline_psnr) << '\n';
  }
  write_text(dir / "manifest.txt", manifest.str());
  return out;
}

} // namespace genrec
