#pragma once

#include "gwspine/discrete_table.hpp"
#include "gwspine/law_spec.hpp"
#include "gwspine/measure.hpp"
#include "gwspine/numeric.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/oracle.hpp"
#include "gwspine/parallel.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/random.hpp"
#include "gwspine/spine.hpp"
#include "gwspine/tree.hpp"
#include "gwspine/version.hpp"
