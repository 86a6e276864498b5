export interface StageDescriptor {
  stage_id: number;
  sigma: number;
  reveal_tool: "none" | "click" | "hover" | "slider";
  slider_levels?: number[];
}

export interface SessionGrant {
  token: string;
  session_id: string;
  task_count: number;
  stage: StageDescriptor;
}

export interface Task {
  image_id: string;
  width: number;
  height: number;
  index: number;
  task_count: number;
  stage: StageDescriptor;
}

export interface CircleRegion {
  cx: number;
  cy: number;
  r: number;
}

export interface ResponseBody {
  image_id: string;
  q1_category: string;
  q1_other_text?: string;
  q2_realistic: boolean;
  q3_approve: boolean;
  q4_rationale: string;
}

export interface InstrumentItem {
  id: string;
  text: string;
  keying?: string;
}

export interface InstrumentDef {
  scale: [number, number];
  framing: string;
  anchors: Record<string, string>;
  items: InstrumentItem[];
}

export interface DemographicField {
  id: string;
  label: string;
  options: string[];
}

export interface Instruments {
  demographics: { fields: DemographicField[] };
  spane: InstrumentDef;
  panas: InstrumentDef;
  exhaustion: InstrumentDef;
  tam_peou: InstrumentDef;
  tam_pu: InstrumentDef;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function errorDetail(res: { json(): Promise<unknown> }): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? "request failed";
  } catch {
    return "request failed";
  }
}

export class ApiClient {
  token: string | null = null;

  constructor(private base: string = "") {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    if (json) h["Content-Type"] = "application/json";
    return h;
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    const res = await fetch(this.base + path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.json();
  }

  async createSession(workerId: string, stageId: number): Promise<SessionGrant> {
    const grant = (await this.post("/api/sessions", {
      worker_id: workerId,
      stage_id: stageId,
    })) as SessionGrant;
    this.token = grant.token;
    return grant;
  }

  async nextTask(): Promise<Task | null> {
    const res = await fetch(this.base + "/api/tasks/next", {
      headers: this.headers(false),
    });
    if (res.status === 204) return null;
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as Task;
  }

  // Renditions and tiles are fetched (not <img src>) so the bearer token
  // travels in a header and the bytes can be released via revokeObjectURL.
  async fetchRendition(imageId: string, sigma: number): Promise<Blob> {
    const res = await fetch(
      `${this.base}/api/images/${encodeURIComponent(imageId)}?sigma=${sigma}`,
      { headers: this.headers(false) },
    );
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.blob();
  }

  async fetchTile(imageId: string, region: CircleRegion): Promise<Blob> {
    const q = `cx=${region.cx}&cy=${region.cy}&r=${region.r}`;
    const res = await fetch(
      `${this.base}/api/images/${encodeURIComponent(imageId)}/tile?${q}`,
      { headers: this.headers(false) },
    );
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.blob();
  }

  async postReveal(body: Record<string, unknown>): Promise<void> {
    await this.post("/api/reveals", body);
  }

  async postResponse(body: ResponseBody): Promise<void> {
    await this.post("/api/responses", body);
  }

  async postSurvey(body: Record<string, unknown>): Promise<void> {
    await this.post("/api/surveys", body);
  }

  async instruments(): Promise<Instruments> {
    const res = await fetch(this.base + "/api/instruments", {
      headers: this.headers(false),
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as Instruments;
  }
}
