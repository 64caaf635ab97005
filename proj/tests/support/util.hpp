#pragma once

#include <gtest/gtest.h>

#include "gabornoise/error.hpp"
#include "support/tempdir.hpp"

// Asserts that stmt throws gabornoise::Error with the given code.
#define EXPECT_ERRC(stmt, errc)                                                  \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "no exception from " #stmt;                               \
    } catch (const gabornoise::Error& e_) {                                      \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                   \
    }                                                                            \
  } while (0)
