#ifndef GZSL_GZSL_HPP
#define GZSL_GZSL_HPP

#include "gzsl/adam.hpp"
#include "gzsl/allocator.hpp"
#include "gzsl/autodiff.hpp"
#include "gzsl/checkpoint.hpp"
#include "gzsl/config.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/encoder.hpp"
#include "gzsl/eval.hpp"
#include "gzsl/model.hpp"
#include "gzsl/prototype.hpp"
#include "gzsl/sae.hpp"
#include "gzsl/trainer.hpp"

#endif  // GZSL_GZSL_HPP
