/** REST client for the annotation service. */

export interface DemoSummary {
  id: string;
  length: number;
  dt: number;
  has_clicks: boolean;
  has_labels: boolean;
  version: number;
}

export interface Primitive {
  kind: "gripper" | "object" | "slot";
  shape: string;
  x: number;
  y: number;
  theta: number;
  size: number;
  grip?: number;
  held?: boolean;
}

export interface Proprio {
  x: number;
  y: number;
  theta: number;
  grip: number;
}

export interface Frame {
  index: number;
  click: boolean;
  proprio: Proprio;
  primitives: Primitive[];
  mode?: number;
  waypoint?: Proprio;
}

export interface DemoDetail {
  id: string;
  dt: number;
  length: number;
  version: number;
  frames: Frame[];
}

export interface SegmentSpan {
  kind: "sparse" | "dense";
  start: number;
  end: number;
  target: number | null;
}

export interface Preview {
  modes: number[];
  waypoint_indices: number[];
  segments: SegmentSpan[];
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        detail = body.detail ?? JSON.stringify(body);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listDemos(): Promise<DemoSummary[]> {
    return this.request<DemoSummary[]>("/demos");
  }

  getDemo(id: string): Promise<DemoDetail> {
    return this.request<DemoDetail>(`/demos/${id}`);
  }

  putClicks(id: string, clicks: boolean[]): Promise<{ ok: boolean; version: number }> {
    return this.request(`/demos/${id}/clicks`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(clicks),
    });
  }

  preview(id: string, clicks?: boolean[]): Promise<Preview> {
    return this.request<Preview>(`/demos/${id}/preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(clicks ? { clicks } : {}),
    });
  }
}
