#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rmc/design.hpp"
#include "rmc/kriging.hpp"
#include "rmc/policy.hpp"

namespace rmc {

enum class Acquisition { Zc, ZcSur };

Acquisition parse_acquisition(const std::string& name);
std::string to_string(Acquisition a);

struct SequentialConfig {
  std::size_t n0 = 10;          // initial LHS sites
  std::size_t candidates = 0;   // 0 means 100 * dim
  Acquisition acquisition = Acquisition::ZcSur;
  int refit_every = 10;         // 0 keeps the kernel frozen

  void validate(std::size_t n_final) const;
};

// Zero-contour score: local_loss(m, v, h) * weight.
double ei_zc(const Prediction& p, double h, double weight);
double ei_zc(const KrigingModel& model, std::span<const double> x, double h, double weight);

// Stepwise reduction of the local loss if a batch with noise variance
// `noise` were added at x: weight * (l(m, v_k, h) - l(m, v_{k+1}, h)) with
// v_{k+1}^2 = v_k^2 noise / (noise + v_k^2).
double ei_zcsur(const Prediction& p, double h, double noise, double weight);
double ei_zcsur(const KrigingModel& model, std::span<const double> x, double h, double noise,
                double weight);

struct SequentialProblem {
  DesignDomain domain;
  // Decision threshold for the fitted response at x (h, or 0 for timing values).
  std::function<double(std::span<const double>)> threshold;
  // p(t, x | 0, X0)
  std::function<double(std::span<const double>)> weight;
  // M replicate responses at x for augmentation k.
  std::function<std::vector<double>(std::span<const double>, std::size_t)> simulate;
  StreamKey candidate_key;
  FitOptions fit;
  // Fixed points at which the trace also reports the integrated loss; the
  // design-site average moves with the design, this one does not.
  Sites reference;
};

struct SequentialStep {
  std::size_t k = 0;  // design size before the augmentation
  std::vector<double> site;
  double score = 0.0;
  double integrated_loss = 0.0;  // after the augmentation, over the design sites
  double reference_loss = 0.0;   // after the augmentation, over problem.reference
};

struct SequentialResult {
  KrigingModel model;
  FitReport report;
  Design design;
  std::vector<SequentialStep> trace;
};

// Grows an initial fitted design to n_final sites, one replicated batch at a
// time, at the argmax (lowest index on ties) of the acquisition over fresh LHS
// candidates.
SequentialResult grow_design(FitResult initial, Design design, std::size_t n_final,
                             const SequentialConfig& config, const SequentialProblem& problem);

// Mean of local_loss * weight over the model's sites.
double design_integrated_loss(const KrigingModel& model, const SequentialProblem& problem);

// Same over the columns of points (0 when there are none).
double integrated_loss_at(const KrigingModel& model, const SequentialProblem& problem,
                          const Sites& points);

// Header: k,x1..xd,acquisition,integrated_loss,reference_loss
void write_trace_csv(std::ostream& os, const std::vector<SequentialStep>& trace);

}  // namespace rmc
