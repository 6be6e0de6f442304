#pragma once

#include "pina_xmc/binary_io.hpp"
#include "pina_xmc/cluster.hpp"
#include "pina_xmc/error.hpp"
#include "pina_xmc/eval.hpp"
#include "pina_xmc/ingest.hpp"
#include "pina_xmc/linear_xmc.hpp"
#include "pina_xmc/log.hpp"
#include "pina_xmc/parallel.hpp"
#include "pina_xmc/pina.hpp"
#include "pina_xmc/pipeline.hpp"
#include "pina_xmc/sparse.hpp"
#include "pina_xmc/synthetic.hpp"
#include "pina_xmc/textvec.hpp"
