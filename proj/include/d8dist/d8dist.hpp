#pragma once

#include "ascii_grid.hpp"
#include "cli.hpp"
#include "codec.hpp"
#include "d8.hpp"
#include "grid.hpp"
#include "hydro.hpp"
#include "master.hpp"
#include "messages.hpp"
#include "pipeline.hpp"
#include "synthetic.hpp"
#include "transport.hpp"
#include "worker.hpp"
