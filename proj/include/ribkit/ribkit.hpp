#pragma once

#include "ribkit/centerline.hpp"
#include "ribkit/components.hpp"
#include "ribkit/error.hpp"
#include "ribkit/gradcheck.hpp"
#include "ribkit/infer.hpp"
#include "ribkit/io.hpp"
#include "ribkit/log.hpp"
#include "ribkit/losses.hpp"
#include "ribkit/metrics.hpp"
#include "ribkit/nifti.hpp"
#include "ribkit/parallel.hpp"
#include "ribkit/phantom.hpp"
#include "ribkit/protocol.hpp"
#include "ribkit/refine.hpp"
#include "ribkit/rng.hpp"
#include "ribkit/sides.hpp"
#include "ribkit/subprocess.hpp"
#include "ribkit/volume.hpp"
