#pragma once

#include "semaug/bm25.hpp"
#include "semaug/crf.hpp"
#include "semaug/datamodel.hpp"
#include "semaug/encoder.hpp"
#include "semaug/error.hpp"
#include "semaug/fusion.hpp"
#include "semaug/gradcheck.hpp"
#include "semaug/harness.hpp"
#include "semaug/io.hpp"
#include "semaug/model.hpp"
#include "semaug/optim.hpp"
#include "semaug/params.hpp"
#include "semaug/retrieval.hpp"
#include "semaug/tensor.hpp"
#include "semaug/textrank.hpp"
