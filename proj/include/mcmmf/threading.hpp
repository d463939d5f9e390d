#pragma once

namespace mcmmf {

// Maps the user-facing thread knob to a concrete count: values <= 0 mean
// "let OpenMP decide", anything else is taken literally. Returns 1 when the
// library was built without OpenMP.
int resolve_threads(int requested);

} // namespace mcmmf
