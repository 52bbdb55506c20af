#pragma once
#include <string>
inline const std::string kFixtures = DYNTAMP_FIXTURES_DIR;
