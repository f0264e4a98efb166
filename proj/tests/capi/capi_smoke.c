/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


/* Compiles the public header as C and exercises the handle lifecycle. */

#include <stdio.h>
#include <string.h>

#include "rolefed/rolefed.h"

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
              rolefed_last_error());                              \
      return 1;                                                   \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  rolefed_experiment* exp = NULL;
  rolefed_preproc_options opts;
  rolefed_gradcheck_report reports[4];
  uint32_t rounds = 0;
  if (argc < 3) return 2;

  EXPECT(strcmp(rolefed_version(), "") != 0);
  EXPECT(rolefed_experiment_open("/nonexistent/config.json", &exp) == ROLEFED_ERR_IO);
  EXPECT(exp == NULL);
  EXPECT(strlen(rolefed_last_error()) > 0);
  EXPECT(rolefed_experiment_open(NULL, &exp) == ROLEFED_ERR_CONFIG);

  EXPECT(rolefed_preproc_defaults("desk", &opts) == ROLEFED_OK);
  EXPECT(opts.char_len == 256);
  EXPECT(rolefed_preproc_defaults("huge", &opts) == ROLEFED_ERR_CONFIG);

  EXPECT(rolefed_experiment_open(argv[1], &exp) == ROLEFED_OK);
  EXPECT(strlen(rolefed_last_error()) == 0);
  EXPECT(rolefed_experiment_set_workers(exp, 0) == ROLEFED_ERR_CONFIG);
  EXPECT(rolefed_experiment_set_workers(exp, 2) == ROLEFED_OK);
  EXPECT(rolefed_experiment_set_rounds(exp, 2) == ROLEFED_OK);
  EXPECT(rolefed_experiment_set_output_dir(exp, argv[2]) == ROLEFED_OK);
  EXPECT(strcmp(rolefed_experiment_output_dir(exp), argv[2]) == 0);
  EXPECT(rolefed_experiment_run(exp) == ROLEFED_OK);
  EXPECT(rolefed_experiment_rounds_completed(exp, &rounds) == ROLEFED_OK);
  EXPECT(rounds == 2);
  rolefed_experiment_close(exp);
  rolefed_experiment_close(NULL);

  EXPECT(rolefed_gradcheck("desk", 1, 1, 4, 1e-4, 0, reports) == ROLEFED_OK);
  EXPECT(strcmp(reports[3].head, "fusion") == 0);
  EXPECT(rolefed_gradcheck("desk", 1, 1, 4, 1e-4, 1, reports) == ROLEFED_ERR_CHECK_FAILED);
  EXPECT(strcmp(rolefed_status_name(ROLEFED_ERR_CHECK_FAILED), "check failed") == 0);
  puts("capi smoke ok");
  return 0;
}
