import { vi } from "vitest";
import type { Instruments, StageDescriptor, Task } from "../src/api.js";

export interface RecordedCall {
  url: string;
  method: string;
  body?: Record<string, unknown>;
  at: number;
}

export interface FakeServer {
  calls: RecordedCall[];
  tileStatus: number;
  responseStatus: number;
  imageCalls(): RecordedCall[];
  tileCalls(): RecordedCall[];
  reveals(): RecordedCall[];
  posts(path: string): RecordedCall[];
}

const PNG_BYTES = new Uint8Array([0x89, 0x50, 0x4e, 0x47]);

function jsonResponse(status: number, payload: unknown) {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => payload,
    blob: async () => new Blob([PNG_BYTES]),
  };
}

function blobResponse() {
  return {
    ok: true,
    status: 200,
    json: async () => ({}),
    blob: async () => new Blob([PNG_BYTES]),
  };
}

export function installFakeServer(instruments?: Instruments): FakeServer {
  const server: FakeServer = {
    calls: [],
    tileStatus: 200,
    responseStatus: 201,
    imageCalls: () =>
      server.calls.filter((c) => c.url.includes("/api/images/") && !c.url.includes("/tile")),
    tileCalls: () => server.calls.filter((c) => c.url.includes("/tile")),
    reveals: () => server.calls.filter((c) => c.url.endsWith("/api/reveals")),
    posts: (path) => server.calls.filter((c) => c.method === "POST" && c.url.endsWith(path)),
  };

  const impl = async (input: unknown, init?: { method?: string; body?: string }) => {
    const url = String(input);
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body) : undefined,
      at: Date.now(),
    };
    server.calls.push(call);

    if (url.includes("/tile")) {
      return server.tileStatus === 200
        ? blobResponse()
        : jsonResponse(server.tileStatus, { error: "forbidden", detail: "tile refused" });
    }
    if (url.includes("/api/images/")) return blobResponse();
    if (url.endsWith("/api/responses")) {
      return server.responseStatus === 201
        ? jsonResponse(201, { status: "recorded" })
        : jsonResponse(server.responseStatus, { error: "conflict", detail: "already answered" });
    }
    if (url.endsWith("/api/reveals") || url.endsWith("/api/surveys")) {
      return jsonResponse(201, { status: "recorded" });
    }
    if (url.endsWith("/api/instruments")) return jsonResponse(200, instruments ?? {});
    if (url.endsWith("/api/sessions")) {
      return jsonResponse(201, { token: "t", session_id: "s1", task_count: 1 });
    }
    return jsonResponse(404, { error: "not_found", detail: url });
  };

  vi.stubGlobal("fetch", vi.fn(impl));
  return server;
}

export const createdUrls: string[] = [];
export const revokedUrls: string[] = [];

export function installObjectUrls(): void {
  createdUrls.length = 0;
  revokedUrls.length = 0;
  let counter = 0;
  URL.createObjectURL = (() => {
    const url = `blob:mock-${counter++}`;
    createdUrls.push(url);
    return url;
  }) as typeof URL.createObjectURL;
  URL.revokeObjectURL = ((url: string) => {
    revokedUrls.push(url);
  }) as typeof URL.revokeObjectURL;
}

const STAGE_TOOLS: Record<number, StageDescriptor["reveal_tool"]> = {
  1: "none",
  2: "none",
  3: "none",
  4: "click",
  5: "hover",
  6: "slider",
};

export function makeTask(stageId: number): Task {
  const stage: StageDescriptor = {
    stage_id: stageId,
    sigma: stageId === 1 ? 0 : stageId === 2 ? 7 : 14,
    reveal_tool: STAGE_TOOLS[stageId],
  };
  if (stageId === 6) stage.slider_levels = [14, 12, 10, 8, 6, 4, 2, 0];
  return {
    image_id: "img-1",
    width: 200,
    height: 160,
    index: 0,
    task_count: 6,
    stage,
  };
}

/** jsdom only runs radio/checkbox activation events for connected nodes. */
export function mount<T extends HTMLElement>(el: T): T {
  document.body.appendChild(el);
  return el;
}

/** Drain pending microtasks so fetch-then-DOM chains settle. */
export async function settle(rounds = 8): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}

export function makeInstruments(): Instruments {
  const items = (prefix: string, n: number) =>
    Array.from({ length: n }, (_, i) => ({
      id: `${prefix}_${String(i + 1).padStart(2, "0")}`,
      text: `${prefix} item ${i + 1}`,
    }));
  return {
    demographics: {
      fields: [
        { id: "age_band", label: "Age", options: ["18-24", "25-34", "prefer not to say"] },
        { id: "gender", label: "Gender", options: ["woman", "man", "prefer not to say"] },
        {
          id: "race_ethnicity",
          label: "Race / ethnicity",
          options: ["Asian", "White", "Multiracial", "prefer not to say"],
        },
      ],
    },
    spane: {
      scale: [1, 5],
      framing: "How often did you feel each of the following?",
      anchors: { "1": "Very rarely or never", "5": "Very often or always" },
      items: items("spane", 12),
    },
    panas: {
      scale: [1, 7],
      framing: "To what extent did you feel each of the following?",
      anchors: { "1": "Not at all", "7": "Extremely" },
      items: items("panas", 10),
    },
    exhaustion: {
      scale: [1, 7],
      framing: "How do you feel right now?",
      anchors: { "1": "Strongly disagree", "7": "Strongly agree" },
      items: items("exhaustion", 6),
    },
    tam_peou: {
      scale: [1, 7],
      framing: "About the tool you just used:",
      anchors: { "1": "Strongly disagree", "7": "Strongly agree" },
      items: items("tam_peou", 6),
    },
    tam_pu: {
      scale: [1, 7],
      framing: "About the tool's usefulness:",
      anchors: { "1": "Strongly disagree", "7": "Strongly agree" },
      items: items("tam_pu", 6),
    },
  };
}
