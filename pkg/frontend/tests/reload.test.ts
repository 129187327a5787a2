/** Refresh safety: the client holds no authoritative state, so rebuilding
 * any screen from the API after a page reload must reproduce exactly the
 * same view state. Five scripted scenarios, each loaded through two
 * independent clients (before vs after "reload") and compared deeply. */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { AssignmentView } from "../src/types.js";
import {
  buildAnnotationScreen,
  buildLeadDashboard,
  buildStatusRows,
} from "../src/viewstate.js";

type Routes = Record<string, unknown>;

function stubClient(routes: Routes): ApiClient {
  const fetchFn = async (url: string, init?: RequestInit) => {
    const key = `${init?.method ?? "GET"} ${url}`;
    if (!(key in routes)) {
      return new Response(JSON.stringify({ detail: `no stub for ${key}` }), { status: 404 });
    }
    return new Response(JSON.stringify(routes[key]), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  const client = new ApiClient("", fetchFn);
  client.token = "stub-token";
  return client;
}

function assignmentView(partial: Partial<AssignmentView> & Pick<AssignmentView, "units">): AssignmentView {
  return {
    assignment_id: "asg-1",
    task_id: "task-1",
    pair_id: "ar-en",
    annotator_id: "ann-1",
    status: "in_progress",
    grade: null,
    feedback: null,
    version: 3,
    ...partial,
  };
}

const tokenRow = (
  index: number,
  surface: string,
  auto: string | null,
  manual: string | null = null,
  committed: string | null = null
) => ({
  index,
  surface,
  char_start: 0,
  char_end: 1,
  auto_tag: auto,
  manual_tag: manual,
  committed_tag: committed,
});

async function loadAnnotationScreen(client: ApiClient) {
  const view = await client.getAssignment("asg-1");
  return buildAnnotationScreen(view);
}

interface Scenario {
  name: string;
  routes: Routes;
  load: (client: ApiClient) => Promise<unknown>;
  check?: (state: any) => void;
}

const SCENARIOS: Scenario[] = [
  {
    name: "fresh assignment with pre-tags only",
    routes: {
      "GET /assignments/asg-1": assignmentView({
        units: [
          {
            unit_id: "u0",
            genre: "tweet",
            text: null,
            source_meta: { tweet_id: "1", author_id: "a" },
            tokens: [
              tokenRow(0, "عايز", null),
              tokenRow(1, "http://t.co/x", "url"),
              tokenRow(2, "!", "punct"),
            ],
            draft: null,
            unit_version: 0,
            duration_seconds: null,
          },
        ],
      }),
    },
    load: loadAnnotationScreen,
    check: (screen) => {
      expect(screen.submitEnabled).toBe(false);
      expect(screen.units[0].tokens.map((t: any) => t.displayColor)).toEqual([
        "black",
        "orange",
        "orange",
      ]);
    },
  },
  {
    name: "mid-annotation with a saved draft",
    routes: {
      "GET /assignments/asg-1": assignmentView({
        units: [
          {
            unit_id: "u0",
            genre: "plain",
            text: null,
            source_meta: { line_no: "1" },
            tokens: [tokenRow(0, "عايز", null), tokenRow(1, "القاهرة", "ne")],
            draft: { "0": "lang1" },
            unit_version: 0,
            duration_seconds: null,
          },
        ],
      }),
    },
    load: loadAnnotationScreen,
    check: (screen) => {
      // the draft survives the reload and renders blue
      expect(screen.units[0].tokens[0].displayColor).toBe("blue");
      expect(screen.units[0].tokens[0].effectiveTag).toBe("lang1");
      expect(screen.units[0].tokens[1].displayColor).toBe("purple");
      expect(screen.submitEnabled).toBe(true);
    },
  },
  {
    name: "everything tagged, ready to submit",
    routes: {
      "GET /assignments/asg-1": assignmentView({
        units: [
          {
            unit_id: "u0",
            genre: "plain",
            text: null,
            source_meta: { line_no: "1" },
            tokens: [
              tokenRow(0, "kda", "latin", "lang2", "lang2"),
              tokenRow(1, "2018", "digit", null, "digit"),
            ],
            draft: null,
            unit_version: 1,
            duration_seconds: 21.5,
          },
        ],
      }),
    },
    load: loadAnnotationScreen,
    check: (screen) => {
      expect(screen.submitEnabled).toBe(true);
      expect(screen.units[0].committed).toBe(true);
    },
  },
  {
    name: "rejected assignment in the check-status list",
    routes: {
      "GET /me/stats": {
        annotator_id: "ann-1",
        n_tokens_annotated: 6,
        timing: { n: 2, mean: 30, median: 30, min: 20, max: 40 },
        assignments: [
          {
            assignment_id: "asg-1",
            task_id: "task-1",
            status: "rejected",
            grade: "no_pass",
            feedback: "fix NE tags",
            n_units: 2,
            n_units_submitted: 2,
            n_tokens: 6,
            n_tokens_annotated: 6,
            mean_seconds_per_unit: 30,
          },
        ],
      },
    },
    load: async (client) => buildStatusRows(await client.myStats()),
    check: (rows) => {
      expect(rows[0].actionLabel).toBe("re-annotate");
      expect(rows[0].feedback).toBe("fix NE tags");
    },
  },
  {
    name: "lead dashboard with queue and reports",
    routes: {
      "GET /tasks/task-1/submissions": [
        {
          assignment_id: "asg-1",
          task_id: "task-1",
          annotator_id: "ann-1",
          unit_ids: ["u0", "u1"],
          status: "submitted",
          grade: null,
          feedback: null,
        },
      ],
      "GET /tasks/task-1/iaa": {
        pairs: [
          {
            annotator_a: "ann-1",
            annotator_b: "ann-2",
            observed_agreement: 0.9,
            kappa: 0.82,
            n_tokens: 30,
          },
        ],
        mean_observed_agreement: 0.9,
      },
      "GET /tasks/task-1/tag-distribution": { lang1: 11, punct: 4, lang2: 11 },
      "GET /tasks/task-1/timing": { n: 4, mean: 25, median: 24, min: 20, max: 32 },
    },
    load: async (client) =>
      buildLeadDashboard(
        await client.submissions("task-1"),
        await client.iaa("task-1"),
        null,
        await client.tagDistribution("task-1"),
        await client.timing("task-1")
      ),
    check: (dashboard) => {
      expect(dashboard.submissions).toHaveLength(1);
      expect(dashboard.iaa.mean_observed_agreement).toBe(0.9);
      expect(dashboard.tagDistribution[0]).toEqual({ tag: "lang1", count: 11 });
    },
  },
];

describe("view state is rebuilt identically after a reload", () => {
  for (const scenario of SCENARIOS) {
    it(scenario.name, async () => {
      const before = await scenario.load(stubClient(scenario.routes));
      const after = await scenario.load(stubClient(scenario.routes)); // fresh client = reload
      expect(JSON.parse(JSON.stringify(after))).toEqual(
        JSON.parse(JSON.stringify(before))
      );
      scenario.check?.(after);
    });
  }
});
