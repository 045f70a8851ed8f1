#pragma once

#include "fofreg/linalg.hpp"
#include "fofreg/funbasis.hpp"
#include "fofreg/fpc.hpp"
#include "fofreg/dgp.hpp"
#include "fofreg/diagnose.hpp"
#include "fofreg/penalize.hpp"
#include "fofreg/fit.hpp"
#include "fofreg/harness.hpp"
#include "fofreg/io.hpp"
