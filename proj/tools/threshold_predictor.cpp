// Example out-of-process predictor: reads request frames on stdin and answers
// on stdout. Foreground logits come from a bone-intensity threshold; every
// rib type gets the same class logit.
//
// Usage: ribkit-threshold-predictor [THRESHOLD]   (default 0.5, on windowed input)

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>

#include <unistd.h>

#include "ribkit/subprocess.hpp"

int main(int argc, char** argv) {
  float threshold = 0.5f;
  if (argc > 1) threshold = std::strtof(argv[1], nullptr);
  try {
    ribkit::serve_predictions(STDIN_FILENO, STDOUT_FILENO, [&](const ribkit::Volume& patch) {
      ribkit::HeadOutput out{ribkit::Volume(patch.dims(), patch.spacing(), 0.0f), {}};
      for (std::size_t i = 0; i < patch.size(); ++i)
        out.binary[i] = patch[i] > threshold ? 10.0f : -10.0f;
      out.classes.assign(ribkit::kRibTypes, ribkit::Volume(patch.dims(), patch.spacing(), 0.0f));
      return out;
    });
  } catch (const std::exception& e) {
    std::cerr << "threshold predictor: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
