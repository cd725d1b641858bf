#pragma once

#include "iic/error.hpp"
#include "iic/model.hpp"
#include "iic/normalize.hpp"
#include "iic/keyextract.hpp"
#include "iic/intdim.hpp"
#include "iic/embed.hpp"
#include "iic/index.hpp"
#include "iic/synth.hpp"
#include "iic/io.hpp"
