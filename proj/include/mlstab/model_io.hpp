#pragma once

// ============================================================================
// mlstab/model_io.hpp
//
// JSON (de)serialization: CPN1 models, signal-vector points, and input
// schedules.  All formats are name-based; loaders re-validate every model
// invariant and reject non-finite numbers.
// ============================================================================

#include <string>
#include <vector>

#include "mlstab/model.hpp"

namespace mlstab {

/// One scheduled input change: at time t, set `signal` to `value`.
struct InputEvent {
  double t = 0.0;
  std::string signal;
  double value = 0.0;
};

/// Serializes a model to the documented JSON schema
/// {partition:{n,m,p,q,names[]}, phi:[[..]], s:[[..]], meta:{lifts,..}}.
[[nodiscard]] std::string model_to_json(const Cpn1Model& model);
void save_model(const Cpn1Model& model, const std::string& path);

/// Parses and validates a model; throws std::runtime_error with a
/// field-level message on malformed input (including NaN/Inf rejection).
[[nodiscard]] Cpn1Model model_from_json(const std::string& text);
[[nodiscard]] Cpn1Model load_model(const std::string& path);

/// Point files map signal names to values ({"signals": {name: value}});
/// unlisted signals default to zero.
[[nodiscard]] std::string point_to_json(const SignalVector& v);
void save_point(const SignalVector& v, const std::string& path);
[[nodiscard]] SignalVector point_from_json(const Cpn1Model& model,
                                           const std::string& text);
[[nodiscard]] SignalVector load_point(const Cpn1Model& model,
                                      const std::string& path);

/// Schedule files are arrays of {t, signal, value}, sorted by time on load.
[[nodiscard]] std::vector<InputEvent> schedule_from_json(
    const std::string& text);
[[nodiscard]] std::vector<InputEvent> load_schedule(const std::string& path);
[[nodiscard]] std::string schedule_to_json(
    const std::vector<InputEvent>& events);

/// Reads a whole file; throws std::runtime_error when unreadable.
[[nodiscard]] std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mlstab
