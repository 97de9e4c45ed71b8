#pragma once

#include "pdeloop/numerics.hpp"
#include "pdeloop/model.hpp"
#include "pdeloop/certificate.hpp"
#include "pdeloop/spectral.hpp"
#include "pdeloop/trajectory.hpp"
#include "pdeloop/solvers.hpp"
#include "pdeloop/certify.hpp"
#include "pdeloop/verify.hpp"
#include "pdeloop/config.hpp"
#include "pdeloop/app.hpp"
