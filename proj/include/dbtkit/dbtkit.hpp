#ifndef DBTKIT_DBTKIT_HPP
#define DBTKIT_DBTKIT_HPP

#include "dbtkit/config.hpp"
#include "dbtkit/froceval.hpp"
#include "dbtkit/gridcodec.hpp"
#include "dbtkit/io.hpp"
#include "dbtkit/losses.hpp"
#include "dbtkit/phantom.hpp"
#include "dbtkit/postprocess.hpp"
#include "dbtkit/preprocess.hpp"
#include "dbtkit/rng.hpp"
#include "dbtkit/split.hpp"
#include "dbtkit/types.hpp"

#endif  // DBTKIT_DBTKIT_HPP
