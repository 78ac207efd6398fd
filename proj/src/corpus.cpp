#include "specdraft/corpus.hpp"

#include <cstdio>

#include "specdraft/errors.hpp"
#include "specdraft/rng.hpp"

namespace specdraft {

void PlantedCorpusSpec::validate() const {
  if (alphabet < 2 || alphabet > 26) throw ConfigError("alphabet must be in [2, 26]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  if (!(rho > 0.5 && rho <= 1.0)) throw ConfigError("rho must be in (0.5, 1]");
  if (lambda > 0.0 && (templates == 0 || template_length < 2)) {
    throw ConfigError("lambda > 0 needs at least one template of length >= 2");
  }
  if (documents == 0 || document_length == 0) throw ConfigError("corpus must have documents of positive length");
}

PlantedCorpus gen_corpus(const PlantedCorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, "corpus"));
  auto random_symbol = [&] { return static_cast<char>('a' + rng.below(spec.alphabet)); };

  PlantedCorpus out;
  for (std::size_t t = 0; t < spec.templates; ++t) {
    std::string tmpl;
    for (std::size_t i = 0; i < spec.template_length; ++i) tmpl.push_back(random_symbol());
    out.templates.push_back(std::move(tmpl));
  }

  for (std::size_t d = 0; d < spec.documents; ++d) {
    std::string doc;
    while (doc.size() < spec.document_length) {
      // Start a template whenever doing so keeps coverage at or under lambda.
      const double after = static_cast<double>(out.template_positions + spec.template_length);
      const double total = static_cast<double>(out.positions + spec.template_length);
      const bool planted = spec.lambda > 0.0 && after <= spec.lambda * total + 0.5 * spec.template_length;
      if (!planted) {
        doc.push_back(random_symbol());
        ++out.positions;
        continue;
      }
      const std::string& tmpl = out.templates[rng.below(spec.templates)];
      for (char c : tmpl) {
        if (doc.size() == spec.document_length) break;
        char emitted = c;
        if (rng.uniform() >= spec.rho) {
          // Noise: any symbol other than the template's.
          emitted = static_cast<char>('a' + rng.below(spec.alphabet - 1));
          if (emitted >= c) ++emitted;
        }
        doc.push_back(emitted);
        ++out.positions;
        ++out.template_positions;
      }
    }
    out.documents.push_back(std::move(doc));
  }
  return out;
}

std::string corpus_hash(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& doc : corpus) {
    for (char c : doc) feed(static_cast<unsigned char>(c));
    feed('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace specdraft
