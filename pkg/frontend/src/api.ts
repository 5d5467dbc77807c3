/** Typed client for the annotation service HTTP+JSON API. */

export interface TranscriptRow {
  user: string;
  response: string;
}

export interface StudyItem {
  item_id: string;
  dialog_id: string;
  alias: string;
  transcript: TranscriptRow[];
  criteria: string[];
}

export interface Progress {
  served: number;
  total: number;
}

export interface NextResponse {
  done: boolean;
  item?: StudyItem;
  progress: Progress;
}

export interface RatingSubmission {
  session_id: string;
  item_id: string;
  criterion: string;
  score: number;
  comment?: string;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly code: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<never> {
  let code = "HTTP_ERROR";
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(message, code, response.status);
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? null : JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  async instructions(): Promise<string> {
    const payload = await this.get<{ text: string }>("/instructions");
    return payload.text;
  }

  async createSession(studyId: string): Promise<string> {
    const payload = await this.post<{ session_id: string }>(
      `/studies/${encodeURIComponent(studyId)}/sessions`,
    );
    return payload.session_id;
  }

  async nextItem(studyId: string, sessionId: string): Promise<NextResponse> {
    return this.get<NextResponse>(
      `/studies/${encodeURIComponent(studyId)}/sessions/${encodeURIComponent(sessionId)}/next`,
    );
  }

  async submitRating(rating: RatingSubmission): Promise<void> {
    await this.post<{ status: string }>("/ratings", rating);
  }
}
