#pragma once

#include "iterfilt/errors.hpp"
#include "iterfilt/ifilter.hpp"
#include "iterfilt/kernel.hpp"
#include "iterfilt/model.hpp"
#include "iterfilt/models.hpp"
#include "iterfilt/oracle.hpp"
#include "iterfilt/parallel.hpp"
#include "iterfilt/resample.hpp"
#include "iterfilt/rng.hpp"
#include "iterfilt/smc.hpp"
#include "iterfilt/transform.hpp"
