#include "omnic/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "omnic/errors.hpp"
#include "omnic/tokenizer.hpp"

namespace omnic {
namespace {

constexpr std::uint64_t kPrototypeSalt = 0x9E3779B97F4A7C15ULL;

struct Disc {
  double cy, cx, radius;
  double color[3];
};

struct ImageClass {
  std::vector<Disc> discs;
};

struct AudioClass {
  std::vector<std::size_t> stripe_bins;
  std::size_t pulse_period = 4;
  std::size_t pulse_width = 1;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<ImageClass> image_prototypes(const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  const double h = static_cast<double>(spec.image_height);
  const double w = static_cast<double>(spec.image_width);
  std::vector<ImageClass> classes(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const std::size_t n = 2 + (c % 2);
    for (std::size_t i = 0; i < n; ++i) {
      Disc d{};
      d.cy = uniform(rng, 0.2, 0.8) * h;
      d.cx = uniform(rng, 0.2, 0.8) * w;
      d.radius = uniform(rng, 0.12, 0.22) * std::min(h, w);
      // Saturated colours: one dominant channel, the others low.
      const auto dominant = static_cast<std::size_t>(rng() % 3);
      for (std::size_t ch = 0; ch < 3; ++ch) d.color[ch] = ch == dominant ? uniform(rng, 0.8, 1.0) : uniform(rng, 0.0, 0.5);
      classes[c].discs.push_back(d);
    }
  }
  return classes;
}

ImagePayload render_image(const SyntheticCorpusSpec& spec, const ImageClass& proto, std::mt19937_64& rng) {
  const std::size_t H = spec.image_height;
  const std::size_t W = spec.image_width;
  ImagePayload img{H, W, std::vector<float>(3 * H * W)};
  std::vector<Disc> discs = proto.discs;
  const double jitter = 0.08 * static_cast<double>(std::min(H, W));
  for (Disc& d : discs) {
    d.cy += uniform(rng, -jitter, jitter);
    d.cx += uniform(rng, -jitter, jitter);
    d.radius *= uniform(rng, 0.85, 1.15);
    for (double& c : d.color) c = std::clamp(c + uniform(rng, -0.08, 0.08), 0.0, 1.0);
  }
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double px[3] = {0.15, 0.15, 0.15};
      for (const Disc& d : discs) {
        const double dist = std::hypot(static_cast<double>(y) + 0.5 - d.cy, static_cast<double>(x) + 0.5 - d.cx);
        const double coverage = std::clamp(d.radius + 0.5 - dist, 0.0, 1.0);
        for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1.0 - coverage) * px[ch] + coverage * d.color[ch];
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = px[ch] + spec.noise * uniform(rng, -1.0, 1.0);
        img.pixels[ch * H * W + y * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<AudioClass> audio_prototypes(const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  std::vector<std::size_t> bins(spec.audio_bins);
  std::iota(bins.begin(), bins.end(), std::size_t{0});
  std::vector<AudioClass> classes(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    std::shuffle(bins.begin(), bins.end(), rng);
    const std::size_t n = std::min<std::size_t>(2 + (c % 2), spec.audio_bins);
    classes[c].stripe_bins.assign(bins.begin(), bins.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(classes[c].stripe_bins.begin(), classes[c].stripe_bins.end());
    classes[c].pulse_period = 3 + (rng() % 6);
    classes[c].pulse_width = 1 + (rng() % 2);
  }
  return classes;
}

AudioPayload render_audio(const SyntheticCorpusSpec& spec, const AudioClass& proto, std::mt19937_64& rng) {
  const std::size_t T = spec.audio_frames;
  const std::size_t F = spec.audio_bins;
  AudioPayload a{T, F, std::vector<float>(T * F)};
  const std::size_t phase = rng() % proto.pulse_period;
  const double stripe_level = uniform(rng, 0.6, 0.9);
  const double pulse_level = uniform(rng, 0.3, 0.6);
  const double mod_freq = uniform(rng, 0.1, 0.6);
  const double mod_phase = uniform(rng, 0.0, 6.283185307179586);
  for (std::size_t t = 0; t < T; ++t) {
    const bool pulse = (t + phase) % proto.pulse_period < proto.pulse_width;
    const double mod = 0.85 + 0.15 * std::sin(mod_freq * static_cast<double>(t) + mod_phase);
    for (std::size_t f = 0; f < F; ++f) {
      double v = 0.1;
      if (pulse) v += pulse_level;
      for (std::size_t b : proto.stripe_bins) {
        if (b == f) v += stripe_level * mod;
      }
      v += spec.noise * uniform(rng, -1.0, 1.0);
      a.values[t * F + f] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return a;
}

struct TextClass {
  std::vector<char> favoured;
};

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz ";

std::vector<TextClass> text_prototypes(const SyntheticCorpusSpec& spec, std::mt19937_64& rng) {
  std::vector<char> letters(kAlphabet.begin(), kAlphabet.begin() + 26);
  std::shuffle(letters.begin(), letters.end(), rng);
  std::vector<TextClass> classes(spec.num_classes);
  constexpr std::size_t kFavoured = 6;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    if ((c + 1) * kFavoured > letters.size()) std::shuffle(letters.begin(), letters.end(), rng);
    const std::size_t start = ((c + 1) * kFavoured <= letters.size()) ? c * kFavoured : 0;
    classes[c].favoured.assign(letters.begin() + static_cast<std::ptrdiff_t>(start),
                               letters.begin() + static_cast<std::ptrdiff_t>(start + kFavoured));
  }
  return classes;
}

TextPayload render_text(const SyntheticCorpusSpec& spec, const TextClass& proto, std::mt19937_64& rng) {
  // Noise moves probability mass from the favoured bytes to the whole alphabet.
  const double favoured_mass = std::clamp(0.85 - spec.noise, 0.3, 1.0);
  std::string text(spec.text_len, ' ');
  for (char& ch : text) {
    if (uniform(rng, 0.0, 1.0) < favoured_mass) {
      ch = proto.favoured[rng() % proto.favoured.size()];
    } else {
      ch = kAlphabet[rng() % kAlphabet.size()];
    }
  }
  return TextPayload{ByteTokenizer::encode(text, spec.text_len)};
}

}  // namespace

SyntheticCorpusSpec SyntheticCorpusSpec::for_config(const EncoderConfig& config, Modality modality,
                                                    std::size_t num_classes, std::size_t samples_per_class,
                                                    double noise, std::uint64_t seed) {
  SyntheticCorpusSpec s;
  s.modality = modality;
  s.num_classes = num_classes;
  s.samples_per_class = samples_per_class;
  s.noise = noise;
  s.seed = seed;
  s.image_height = config.image_height;
  s.image_width = config.image_width;
  s.audio_frames = config.audio_frames;
  s.audio_bins = config.audio_bins;
  s.text_len = config.text_len;
  return s;
}

void SyntheticCorpusSpec::validate() const {
  if (num_classes < 2) throw ConfigError("corpus needs at least 2 classes");
  if (samples_per_class == 0) throw ConfigError("corpus needs samples_per_class > 0");
  if (!(noise >= 0.0) || noise > 1.0) throw ConfigError("corpus noise must lie in [0, 1]");
  if (image_height == 0 || image_width == 0 || audio_frames == 0 || audio_bins == 0 || text_len == 0) {
    throw ConfigError("corpus dimensions must be positive");
  }
}

std::vector<ModalitySample> generate_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 proto_rng(spec.seed ^ kPrototypeSalt ^ (static_cast<std::uint64_t>(spec.modality) << 56));
  std::mt19937_64 rng(spec.seed * 2654435761ULL + static_cast<std::uint64_t>(spec.modality) + 1);
  const std::size_t total = spec.num_classes * spec.samples_per_class;
  std::vector<ModalitySample> out;
  out.reserve(total);
  switch (spec.modality) {
    case Modality::kImage: {
      const auto protos = image_prototypes(spec, proto_rng);
      for (std::size_t i = 0; i < total; ++i) {
        const std::size_t c = i % spec.num_classes;
        out.push_back({render_image(spec, protos[c], rng), static_cast<std::int32_t>(c), std::nullopt});
      }
      break;
    }
    case Modality::kAudio: {
      const auto protos = audio_prototypes(spec, proto_rng);
      for (std::size_t i = 0; i < total; ++i) {
        const std::size_t c = i % spec.num_classes;
        out.push_back({render_audio(spec, protos[c], rng), static_cast<std::int32_t>(c), std::nullopt});
      }
      break;
    }
    case Modality::kText: {
      const auto protos = text_prototypes(spec, proto_rng);
      for (std::size_t i = 0; i < total; ++i) {
        const std::size_t c = i % spec.num_classes;
        out.push_back({render_text(spec, protos[c], rng), static_cast<std::int32_t>(c), std::nullopt});
      }
      break;
    }
  }
  return out;
}

CaptionGrammar CaptionGrammar::standard() {
  return CaptionGrammar{{"{class}", "a {class}", "the {class}", "a {class} photo", "one {class} here"},
                        {"apple", "river", "tiger", "cloud", "piano", "stone", "maple", "ocean"}};
}

std::string CaptionGrammar::class_name(std::size_t k) const {
  if (k < class_names.size()) return class_names[k];
  return "class" + std::to_string(k);
}

PairedCorpus generate_paired_corpus(const SyntheticCorpusSpec& spec, const CaptionGrammar& grammar) {
  if (spec.modality == Modality::kText) throw ConfigError("paired corpus side A must be image or audio");
  if (grammar.templates.empty()) throw ConfigError("caption grammar has no templates");
  PairedCorpus out;
  out.side_a = generate_corpus(spec);
  std::mt19937_64 rng(spec.seed ^ 0xC0FFEEULL);
  out.side_b.reserve(out.side_a.size());
  for (std::size_t i = 0; i < out.side_a.size(); ++i) {
    ModalitySample& a = out.side_a[i];
    a.pair_id = static_cast<std::int64_t>(i);
    const std::size_t c = static_cast<std::size_t>(*a.label);
    std::string caption = grammar.templates[rng() % grammar.templates.size()];
    const std::string name = grammar.class_name(c);
    for (std::size_t pos = caption.find("{class}"); pos != std::string::npos; pos = caption.find("{class}")) {
      caption.replace(pos, 7, name);
    }
    out.side_b.push_back({TextPayload{ByteTokenizer::encode(caption, spec.text_len)}, a.label, a.pair_id});
  }
  return out;
}

CorpusSplit split_corpus(const std::vector<ModalitySample>& samples, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in (0, 1]");
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
  CorpusSplit split;
  split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(cut));
  split.held_out.assign(samples.begin() + static_cast<std::ptrdiff_t>(cut), samples.end());
  return split;
}

std::string corpus_manifest_csv(const std::vector<ModalitySample>& samples) {
  std::ostringstream os;
  os << "index,modality,label,pair_id\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ModalitySample& s = samples[i];
    os << i << ',' << modality_name(s.modality()) << ',';
    if (s.label) os << *s.label;
    os << ',';
    if (s.pair_id) os << *s.pair_id;
    os << '\n';
  }
  return os.str();
}

}  // namespace omnic
