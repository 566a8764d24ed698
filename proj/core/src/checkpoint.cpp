#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deepsvm/errors.hpp"
#include "deepsvm/network.hpp"

namespace deepsvm {

namespace {

constexpr char kHex[] = "0123456789abcdef";
constexpr std::size_t kValuesPerLine = 8;

std::string encode(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::string out(16, '0');
  for (int i = 0; i < 8; ++i) {
    const auto byte = static_cast<unsigned>((bits >> (8 * i)) & 0xffu);
    out[2 * i] = kHex[byte >> 4];
    out[2 * i + 1] = kHex[byte & 0xfu];
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

double decode(const std::string& s) {
  if (s.size() != 16) throw CorruptCheckpointError("checkpoint: malformed value '" + s + "'");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    const int hi = hex_digit(s[2 * i]), lo = hex_digit(s[2 * i + 1]);
    if (hi < 0 || lo < 0) throw CorruptCheckpointError("checkpoint: malformed value '" + s + "'");
    bits |= static_cast<std::uint64_t>(hi * 16 + lo) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

void write_tensor(std::ostream& os, const std::string& name, std::span<const double> values,
                  std::size_t rows, std::size_t cols) {
  os << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << encode(values[i]) << ((i + 1) % kValuesPerLine == 0 || i + 1 == values.size() ? '\n' : ' ');
  }
}

void write_layers(std::ostream& os, const DeepONetModel& m, const std::vector<LayerLayout>& layers) {
  const auto p = m.parameters();
  for (const auto& l : layers) {
    write_tensor(os, l.name + ".weight", p.subspan(l.weight_offset, l.rows * l.cols), l.rows, l.cols);
    write_tensor(os, l.name + ".bias", p.subspan(l.bias_offset, l.rows), l.rows, 1);
  }
}

// Whitespace-token reader that reports truncation as corruption.
class Tokens {
 public:
  explicit Tokens(std::istream& is) : is_(is) {}
  std::string next(const char* what) {
    std::string tok;
    if (!(is_ >> tok)) throw CorruptCheckpointError(std::string("checkpoint: truncated at ") + what);
    return tok;
  }
  void expect(const std::string& want) {
    const std::string got = next(want.c_str());
    if (got != want) {
      throw CorruptCheckpointError("checkpoint: expected '" + want + "', found '" + got + "'");
    }
  }
  std::uint64_t number(const char* what) {
    const std::string tok = next(what);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw CorruptCheckpointError(std::string("checkpoint: bad integer for ") + what);
    }
  }
  double value(const char* what) { return decode(next(what)); }

 private:
  std::istream& is_;
};

MLPSpec read_spec(Tokens& t, const std::string& which) {
  t.expect("spec");
  t.expect(which);
  MLPSpec s;
  s.input_width = t.number("spec");
  s.hidden_width = t.number("spec");
  s.hidden_depth = t.number("spec");
  s.output_width = t.number("spec");
  return s;
}

void read_layers(Tokens& t, DeepONetModel& m, const std::vector<LayerLayout>& layers) {
  auto p = m.parameters();
  auto read_tensor = [&](const std::string& name, std::size_t rows, std::size_t cols,
                         std::size_t offset) {
    t.expect("tensor");
    t.expect(name);
    const auto r = t.number("tensor rows");
    const auto c = t.number("tensor cols");
    if (r != rows || c != cols) {
      std::ostringstream os;
      os << "checkpoint: tensor " << name << " has shape " << r << "x" << c << ", expected "
         << rows << "x" << cols;
      throw ShapeMismatchError(os.str());
    }
    for (std::size_t i = 0; i < rows * cols; ++i) p[offset + i] = t.value(name.c_str());
  };
  for (const auto& l : layers) {
    read_tensor(l.name + ".weight", l.rows, l.cols, l.weight_offset);
    read_tensor(l.name + ".bias", l.rows, 1, l.bias_offset);
  }
}

}  // namespace

void write_checkpoint(std::ostream& os, const DeepONetModel& m) {
  const auto& s = m.spec();
  os << kCheckpointVersion << '\n';
  auto spec_line = [&](const char* which, const MLPSpec& ms) {
    os << "spec " << which << ' ' << ms.input_width << ' ' << ms.hidden_width << ' '
       << ms.hidden_depth << ' ' << ms.output_width << '\n';
  };
  spec_line("branch", s.branch);
  spec_line("trunk", s.trunk);
  const auto axes = s.bounds.axes();
  for (std::size_t i = 0; i < axes.size(); ++i) {
    os << "bounds " << DomainBounds::kAxisNames[i] << ' ' << encode(axes[i].lo) << ' '
       << encode(axes[i].hi) << '\n';
  }
  const auto& md = m.metadata;
  os << "meta seed " << md.seed << '\n';
  os << "meta config_hash " << (md.config_hash.empty() ? "-" : md.config_hash) << '\n';
  os << "meta stage " << md.stage << '\n';
  os << "meta step " << md.step << '\n';
  os << "meta losses " << encode(md.loss_phys) << ' ' << encode(md.loss_bound) << ' '
     << encode(md.loss_atm) << ' ' << encode(md.loss_total) << '\n';
  write_layers(os, m, m.branch_layers());
  write_layers(os, m, m.trunk_layers());
  os << "end\n";
}

DeepONetModel read_checkpoint(std::istream& is) {
  Tokens t(is);
  const std::string version = t.next("version");
  if (version != kCheckpointVersion) {
    if (version.rfind("deepsvm-ckpt-", 0) == 0) {
      throw VersionMismatchError("checkpoint: unsupported version '" + version + "', expected " +
                                 kCheckpointVersion);
    }
    throw CorruptCheckpointError("checkpoint: missing version header");
  }
  ModelSpec spec;
  spec.branch = read_spec(t, "branch");
  spec.trunk = read_spec(t, "trunk");
  std::array<Interval, 8> axes{};
  for (std::size_t i = 0; i < axes.size(); ++i) {
    t.expect("bounds");
    t.expect(std::string(DomainBounds::kAxisNames[i]));
    axes[i].lo = t.value("bounds");
    axes[i].hi = t.value("bounds");
  }
  spec.bounds = {axes[5], axes[6], axes[7], axes[0], axes[1], axes[2], axes[3], axes[4]};
  if (spec.branch.output_width != spec.trunk.output_width) {
    throw ShapeMismatchError("checkpoint: branch embedding width " +
                             std::to_string(spec.branch.output_width) + " != trunk width " +
                             std::to_string(spec.trunk.output_width));
  }
  DeepONetModel model;
  try {
    model = DeepONetModel(spec);
  } catch (const ArgumentError& e) {
    throw ShapeMismatchError(std::string("checkpoint: ") + e.what());
  }
  auto& md = model.metadata;
  t.expect("meta");
  t.expect("seed");
  md.seed = t.number("seed");
  t.expect("meta");
  t.expect("config_hash");
  md.config_hash = t.next("config_hash");
  if (md.config_hash == "-") md.config_hash.clear();
  t.expect("meta");
  t.expect("stage");
  md.stage = t.next("stage");
  t.expect("meta");
  t.expect("step");
  md.step = t.number("step");
  t.expect("meta");
  t.expect("losses");
  md.loss_phys = t.value("losses");
  md.loss_bound = t.value("losses");
  md.loss_atm = t.value("losses");
  md.loss_total = t.value("losses");
  read_layers(t, model, model.branch_layers());
  read_layers(t, model, model.trunk_layers());
  t.expect("end");
  return model;
}

void save_checkpoint(const DeepONetModel& model, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("checkpoint: cannot open " + tmp.string() + " for writing");
    write_checkpoint(os, model);
    if (!os.flush()) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

DeepONetModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace deepsvm
