#pragma once

#include "nsvm/baselines.hpp"
#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/eval.hpp"
#include "nsvm/kernel.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"
#include "nsvm/model_io.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_kernel.hpp"
#include "nsvm/nsvm_linear.hpp"
#include "nsvm/pipeline.hpp"
