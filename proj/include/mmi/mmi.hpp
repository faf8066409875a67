#pragma once

#include "mmi/error.hpp"
#include "mmi/fantope.hpp"
#include "mmi/io.hpp"
#include "mmi/isotonic.hpp"
#include "mmi/linalg.hpp"
#include "mmi/lipschitz.hpp"
#include "mmi/model.hpp"
#include "mmi/near_net.hpp"
#include "mmi/parallel.hpp"
#include "mmi/pipeline.hpp"
#include "mmi/rng.hpp"
#include "mmi/stein.hpp"
