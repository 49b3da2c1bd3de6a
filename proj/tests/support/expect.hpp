#pragma once

#include <gtest/gtest.h>

#include "relief/error.hpp"

#define EXPECT_RELIEF_ERROR(statement, expected_code)                       \
  do {                                                                      \
    bool relief_thrown = false;                                             \
    try {                                                                   \
      statement;                                                            \
    } catch (const relief::Error& relief_err) {                             \
      relief_thrown = true;                                                 \
      EXPECT_EQ(relief_err.code(), expected_code) << relief_err.what();     \
    }                                                                       \
    EXPECT_TRUE(relief_thrown) << "expected " #expected_code " from " #statement; \
  } while (0)
