#pragma once

#include "pdca/errors.hpp"
#include "pdca/linalg.hpp"
#include "pdca/model.hpp"
#include "pdca/penalty.hpp"
#include "pdca/inner.hpp"
#include "pdca/extract.hpp"
#include "pdca/dca.hpp"
#include "pdca/io.hpp"
#include "pdca/oracle.hpp"
