// Generates a small synthetic set, trains a reduced model for a few epochs,
// fits thresholds and prints the GZSL metrics.

#include <iostream>

#include "gzsl/gzsl.hpp"

int main() {
  using namespace gzsl;
  GeneratorSpec spec;
  spec.classes_seen = 6;
  spec.classes_unseen = 3;
  spec.train_per_class = 10;
  spec.test_per_class = 5;
  spec.sequence_length = 30;
  Dataset data = generate_synthetic(7, spec);

  const auto stats = fit_normalization(data.train, data.manifest.palm_offset);
  const auto train_set = normalize(data.train, stats);
  const auto test = normalize(data.test, stats);

  ModelConfig mc;
  mc.encoder.input_width = static_cast<Index>(data.manifest.feature_names.size());
  mc.encoder.layers = 1;
  mc.encoder.hidden = 16;
  mc.classes = static_cast<Index>(data.attributes.seen_labels().size());
  mc.attributes = data.attributes.width();

  TrainConfig tc;
  tc.epochs = 5;
  Model<float> model = Model<float>::init(mc, tc.seed);
  model.normalization = stats;
  gzsl::train(model, train_set, data.attributes, tc);
  model.thresholds = fit_thresholds(model, train_set, data.attributes, tc);

  const GzslReport r = evaluate(model, test, data.attributes);
  write_summary(std::cout, "demo", r);
  return 0;
}
