#pragma once
// Umbrella header.

#include "dlgwas/assoc.hpp"
#include "dlgwas/deeplift.hpp"
#include "dlgwas/error.hpp"
#include "dlgwas/genotype.hpp"
#include "dlgwas/io.hpp"
#include "dlgwas/kmeans.hpp"
#include "dlgwas/miami.hpp"
#include "dlgwas/neural.hpp"
#include "dlgwas/parallel.hpp"
#include "dlgwas/phenotype.hpp"
#include "dlgwas/pipeline.hpp"
#include "dlgwas/rng.hpp"
#include "dlgwas/simulate.hpp"
#include "dlgwas/special.hpp"
