#pragma once

#include "cibpu/analytics.hpp"
#include "cibpu/attacks.hpp"
#include "cibpu/baseline.hpp"
#include "cibpu/binsballs.hpp"
#include "cibpu/bits.hpp"
#include "cibpu/checks.hpp"
#include "cibpu/cibtb.hpp"
#include "cibpu/cipht.hpp"
#include "cibpu/config.hpp"
#include "cibpu/dist.hpp"
#include "cibpu/error.hpp"
#include "cibpu/keying.hpp"
#include "cibpu/report.hpp"
#include "cibpu/trace.hpp"
