#include "cicoder/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "byteio.hpp"
#include "cicoder/error.hpp"

namespace cicoder {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

struct BadValue {
  std::string what;
};

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw BadValue{"expected a number"};
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw BadValue{"expected an integer"};
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false"};
}

std::string parse_string(std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') throw BadValue{"expected a quoted string"};
  s = s.substr(1, s.size() - 2);
  if (s.find('"') != std::string_view::npos) throw BadValue{"unexpected quote in string"};
  return std::string(s);
}

std::vector<std::string_view> parse_array(std::string_view s) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw BadValue{"expected an [array]"};
  s = trim(s.substr(1, s.size() - 2));
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (item.empty()) throw BadValue{"empty array element"};
    out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

template <typename T, typename F>
std::string fmt_array(const std::vector<T>& v, F&& fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out + "]";
}

std::string quote(const std::string& s) { return '"' + s + '"'; }

std::string taper_name(Taper t) {
  switch (t) {
    case Taper::kRectangular:
      return "rectangular";
    case Taper::kHann:
      return "hann";
    case Taper::kHannNoZeros:
      return "hann_no_zeros";
  }
  return "hann";
}

Taper taper_from_name(const std::string& s) {
  if (s == "rectangular") return Taper::kRectangular;
  if (s == "hann") return Taper::kHann;
  if (s == "hann_no_zeros") return Taper::kHannNoZeros;
  throw BadValue{"unknown window '" + s + "'"};
}

struct ParseState {
  std::set<std::string> layer_keys;
  std::size_t layer_count = 0;
};

struct Field {
  std::string key;
  std::function<std::string(const GlobalConfig&)> emit;
  std::function<void(GlobalConfig&, ParseState&, std::string_view)> parse;
};

struct Section {
  std::string name;
  std::vector<Field> fields;
};

#define CICODER_INT(sec, member)                                                  \
  Field {                                                                         \
    #member, [](const GlobalConfig& c) { return std::to_string(c.sec.member); },   \
        [](GlobalConfig& c, ParseState&, std::string_view v) {                                 \
          c.sec.member = parse_int<decltype(c.sec.member)>(v);                    \
        }                                                                         \
  }
#define CICODER_DOUBLE(sec, member)                                               \
  Field {                                                                         \
    #member, [](const GlobalConfig& c) { return fmt_double(c.sec.member); },       \
        [](GlobalConfig& c, ParseState&, std::string_view v) { c.sec.member = parse_double(v); } \
  }
#define CICODER_BOOL(sec, member)                                                 \
  Field {                                                                         \
    #member,                                                                      \
        [](const GlobalConfig& c) { return std::string(c.sec.member ? "true" : "false"); }, \
        [](GlobalConfig& c, ParseState&, std::string_view v) { c.sec.member = parse_bool(v); } \
  }

template <typename T, typename Get>
std::vector<T> layer_values(const GlobalConfig& c, Get get) {
  std::vector<T> out;
  for (const auto& l : c.model.tcn_layers) out.push_back(get(l));
  return out;
}

// Per-layer arrays; the first one parsed fixes the layer count, later ones
// must agree.
void set_layers(GlobalConfig& c, ParseState& st, const std::string& key, std::size_t n,
                const std::function<void(TcnLayerSpec&, std::size_t)>& set) {
  if (st.layer_keys.empty()) {
    st.layer_count = n;
    c.model.tcn_layers.resize(n);
  } else if (n != st.layer_count) {
    throw BadValue{"has " + std::to_string(n) + " entries but other layer arrays have " +
                   std::to_string(st.layer_count)};
  }
  st.layer_keys.insert(key);
  for (std::size_t i = 0; i < n; ++i) set(c.model.tcn_layers[i], i);
}

std::vector<Section> schema() {
  std::vector<Section> s;
  s.push_back({"ace",
               {
                   CICODER_INT(ace, num_channels),
                   CICODER_INT(ace, num_maxima),
                   CICODER_INT(ace, fft_size),
                   CICODER_INT(ace, hop),
                   CICODER_INT(ace, sample_rate_hz),
                   {"analysis_window",
                    [](const GlobalConfig& c) { return quote(taper_name(c.ace.analysis_window)); },
                    [](GlobalConfig& c, ParseState&, std::string_view v) {
                      c.ace.analysis_window = taper_from_name(parse_string(v));
                    }},
                   {"band_edges",
                    [](const GlobalConfig& c) { return fmt_array(c.ace.band_edges, fmt_double); },
                    [](GlobalConfig& c, ParseState&, std::string_view v) {
                      c.ace.band_edges.clear();
                      for (auto item : parse_array(v)) c.ace.band_edges.push_back(parse_double(item));
                    }},
                   CICODER_DOUBLE(ace, lgf_base),
                   CICODER_DOUBLE(ace, lgf_saturation),
                   CICODER_DOUBLE(ace, lgf_rho),
               }});

  auto layer_int = [](std::string key, int TcnLayerSpec::*member) {
    return Field{key,
                 [member](const GlobalConfig& c) {
                   return fmt_array(layer_values<int>(c, [&](const TcnLayerSpec& l) { return l.*member; }),
                                    [](int x) { return std::to_string(x); });
                 },
                 [key, member](GlobalConfig& c, ParseState& st, std::string_view v) {
                   std::vector<int> vals;
                   for (auto item : parse_array(v)) vals.push_back(parse_int<int>(item));
                   set_layers(c, st, key, vals.size(),
                              [&](TcnLayerSpec& l, std::size_t i) { l.*member = vals[i]; });
                 }};
  };
  s.push_back({"model",
               {
                   CICODER_INT(model, num_channels),
                   layer_int("channels", &TcnLayerSpec::out_channels),
                   layer_int("kernel_sizes", &TcnLayerSpec::kernel_size),
                   layer_int("dilations", &TcnLayerSpec::dilation),
                   {"activations",
                    [](const GlobalConfig& c) {
                      return fmt_array(
                          layer_values<Activation>(c, [](const TcnLayerSpec& l) { return l.activation; }),
                          [](Activation a) { return quote(to_string(a)); });
                    },
                    [](GlobalConfig& c, ParseState& st, std::string_view v) {
                      std::vector<Activation> vals;
                      for (auto item : parse_array(v)) {
                        try {
                          vals.push_back(activation_from_string(parse_string(item)));
                        } catch (const Error& e) {
                          throw BadValue{e.what()};
                        }
                      }
                      set_layers(c, st, "activations", vals.size(),
                                 [&](TcnLayerSpec& l, std::size_t i) { l.activation = vals[i]; });
                    }},
                   CICODER_INT(model, d_k),
                   CICODER_INT(model, d_v),
                   CICODER_INT(model, attention_context),
               }});
  s.push_back({"training",
               {
                   CICODER_DOUBLE(training, initial_lr),
                   CICODER_INT(training, max_epochs),
                   CICODER_INT(training, early_stop_patience),
                   CICODER_INT(training, lr_patience),
                   CICODER_DOUBLE(training, lr_factor),
                   CICODER_INT(training, batch_files),
                   CICODER_INT(training, chunk_frames),
                   CICODER_DOUBLE(training, loss_weight),
                   CICODER_DOUBLE(training, improvement_tol),
                   CICODER_INT(training, rng_seed),
                   CICODER_DOUBLE(training, beta1),
                   CICODER_DOUBLE(training, beta2),
                   CICODER_DOUBLE(training, epsilon),
               }});
  s.push_back({"vocoder",
               {
                   {"carrier_freqs_hz",
                    [](const GlobalConfig& c) { return fmt_array(c.vocoder.carrier_freqs_hz, fmt_double); },
                    [](GlobalConfig& c, ParseState&, std::string_view v) {
                      c.vocoder.carrier_freqs_hz.clear();
                      for (auto item : parse_array(v))
                        c.vocoder.carrier_freqs_hz.push_back(parse_double(item));
                    }},
                   CICODER_INT(vocoder, output_rate_hz),
                   CICODER_DOUBLE(vocoder, envelope_smoothing_hz),
                   CICODER_BOOL(vocoder, inverse_lgf),
                   CICODER_DOUBLE(vocoder, peak_limit),
               }});
  s.push_back({"stoi",
               {
                   CICODER_INT(stoi, internal_rate_hz),
                   CICODER_INT(stoi, frame_length),
                   CICODER_INT(stoi, hop),
                   CICODER_INT(stoi, fft_size),
                   CICODER_INT(stoi, num_bands),
                   CICODER_DOUBLE(stoi, lowest_center_hz),
                   CICODER_INT(stoi, segment_frames),
                   CICODER_DOUBLE(stoi, silence_range_db),
                   CICODER_DOUBLE(stoi, clip_beta_db),
                   CICODER_BOOL(stoi, reference_method),
               }});
  s.push_back({"experiment",
               {
                   CICODER_INT(experiment, train_files),
                   CICODER_INT(experiment, val_files),
                   CICODER_INT(experiment, test_files),
                   CICODER_INT(experiment, seed),
                   CICODER_BOOL(experiment, rms_normalize),
                   CICODER_DOUBLE(experiment, normalize_dbfs),
               }});
  return s;
}

#undef CICODER_INT
#undef CICODER_DOUBLE
#undef CICODER_BOOL

}  // namespace

void GlobalConfig::validate() const {
  ace.validate();
  model.validate();
  training.validate();
  stoi.validate();
  if (model.num_channels != ace.num_channels)
    throw Error("config: model.num_channels must equal ace.num_channels");
  if (!vocoder.carrier_freqs_hz.empty() &&
      vocoder.carrier_freqs_hz.size() != static_cast<std::size_t>(ace.num_channels))
    throw Error("config: vocoder.carrier_freqs_hz needs one entry per ACE channel");
}

GlobalConfig parse_config(std::string_view text) {
  const auto sections = schema();
  GlobalConfig cfg;
  ParseState state;

  const Section* current = nullptr;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto fail = [&](const std::string& msg) {
      throw FormatError("config line " + std::to_string(line_no) + ": " + msg);
    };
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      current = nullptr;
      for (const auto& s : sections)
        if (s.name == name) current = &s;
      if (!current) fail("unknown section [" + name + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (!current) fail("key '" + key + "' outside a section");
    const Field* field = nullptr;
    for (const auto& f : current->fields)
      if (f.key == key) field = &f;
    if (!field) fail("unknown key '" + key + "' in [" + current->name + "]");
    if (!seen.insert(current->name + "." + key).second) fail("duplicate key '" + key + "'");
    try {
      field->parse(cfg, state, value);
    } catch (const BadValue& e) {
      fail(current->name + "." + key + ": " + e.what);
    }
  }
  return cfg;
}

GlobalConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    GlobalConfig cfg = parse_config(text);
    cfg.validate();
    return cfg;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string emit_config(const GlobalConfig& config) {
  std::string out;
  for (const auto& s : schema()) {
    if (!out.empty()) out += '\n';
    out += '[' + s.name + "]\n";
    for (const auto& f : s.fields) out += f.key + " = " + f.emit(config) + '\n';
  }
  return out;
}

}  // namespace cicoder
