#pragma once

#include <chrono>
#include <cstdint>

namespace glar {

// Counters and component timers for the reasoning pipeline. Extraction and
// labeling are counted where they happen (query-context construction), the
// forward timer around tape construction + execution. One instance per
// worker thread when scoring in parallel; merge() folds workers together.
struct Instrumentation {
  uint64_t extractions = 0;
  uint64_t cache_hits = 0;
  uint64_t forward_passes = 0;
  double extraction_seconds = 0.0;
  double labeling_seconds = 0.0;
  double forward_seconds = 0.0;

  void merge(const Instrumentation& other) {
    extractions += other.extractions;
    cache_hits += other.cache_hits;
    forward_passes += other.forward_passes;
    extraction_seconds += other.extraction_seconds;
    labeling_seconds += other.labeling_seconds;
    forward_seconds += other.forward_seconds;
  }
};

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace glar
